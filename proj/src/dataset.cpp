#include "calfplay/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "calfplay/csv.hpp"

namespace calfplay {

namespace {

constexpr char kNpyMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

}  // namespace

EmbeddingVector load_embedding(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open embedding file: " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());

    std::size_t offset = 0;
    if (bytes.size() >= 10 && std::memcmp(bytes.data(), kNpyMagic, 6) == 0) {
        // npy v1: 2-byte little-endian header length at offset 8.
        std::uint16_t hlen = static_cast<std::uint8_t>(bytes[8]) |
                             (static_cast<std::uint8_t>(bytes[9]) << 8);
        offset = 10 + hlen;
        if (offset > bytes.size())
            throw DatasetError("truncated npy header: " + path);
    }

    std::size_t payload = bytes.size() - offset;
    if (payload != kEmbeddingDim * sizeof(float))
        throw DatasetError(path + ": expected " +
                           std::to_string(kEmbeddingDim * sizeof(float)) +
                           " payload bytes (" + std::to_string(kEmbeddingDim) +
                           " float32), got " + std::to_string(payload));

    EmbeddingVector v;
    v.source_path = path;
    v.values.resize(kEmbeddingDim);
    // Little-endian float32; matches the host on every supported platform.
    std::memcpy(v.values.data(), bytes.data() + offset, payload);
    for (float f : v.values)
        if (!std::isfinite(f))
            throw DatasetError(path + ": non-finite embedding component");
    return v;
}

std::string to_string(SampleClass c) {
    switch (c) {
        case SampleClass::ActivePlaying: return "Active Playing";
        case SampleClass::NonActivePlaying: return "Non-Active Playing";
        case SampleClass::NotPlaying: return "Not Playing";
    }
    return "?";
}

std::string to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

std::uint64_t DeterministicRng::bounded(std::uint64_t bound) {
    // Rejection sampling over the top of the range keeps the draw unbiased.
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                          std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % bound;
}

std::vector<ManifestEntry> stratified_downsample(
    const std::vector<ManifestEntry>& samples, std::uint64_t seed) {
    std::array<std::vector<std::size_t>, kNumClasses> by_class;
    for (std::size_t i = 0; i < samples.size(); ++i)
        by_class[static_cast<int>(samples[i].cls)].push_back(i);

    std::size_t minority = samples.size();
    for (int c = 0; c < kNumClasses; ++c) {
        if (by_class[c].empty())
            throw DatasetError("class '" +
                               to_string(static_cast<SampleClass>(c)) +
                               "' has no samples");
        minority = std::min(minority, by_class[c].size());
    }

    DeterministicRng rng(seed);
    std::vector<ManifestEntry> out;
    out.reserve(minority * kNumClasses);
    for (int c = 0; c < kNumClasses; ++c) {
        rng.shuffle(by_class[c]);
        for (std::size_t i = 0; i < minority; ++i)
            out.push_back(samples[by_class[c][i]]);
    }
    rng.shuffle(out);
    return out;
}

std::vector<ManifestEntry> stratified_split(std::vector<ManifestEntry> samples,
                                            const SplitFractions& fractions,
                                            std::uint64_t seed) {
    const std::array<double, 3> frac = {fractions.train, fractions.val,
                                        fractions.test};
    for (double f : frac)
        if (f < 0) throw DatasetError("split fraction must be non-negative");
    double total = frac[0] + frac[1] + frac[2];
    if (std::abs(total - 1.0) > 1e-9)
        throw DatasetError("split fractions must sum to 1");

    DeterministicRng rng(seed);
    std::array<std::vector<std::size_t>, kNumClasses> by_class;
    for (std::size_t i = 0; i < samples.size(); ++i)
        by_class[static_cast<int>(samples[i].cls)].push_back(i);

    // Largest-remainder apportionment of a count over the three splits.
    auto apportion = [&](std::size_t n, std::array<double, 3>& remainders) {
        std::array<std::size_t, 3> counts;
        std::size_t assigned = 0;
        for (int s = 0; s < 3; ++s) {
            double exact = frac[s] * static_cast<double>(n);
            counts[s] = static_cast<std::size_t>(std::floor(exact));
            remainders[s] = exact - std::floor(exact);
            assigned += counts[s];
        }
        std::array<int, 3> order = {0, 1, 2};
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return remainders[a] > remainders[b];
        });
        for (std::size_t leftover = n - assigned, k = 0; k < leftover; ++k)
            ++counts[order[k % 3]];
        return counts;
    };

    // Global split totals set the targets; each class then starts from its
    // floor counts and the per-class leftovers are assigned to the split
    // with the highest per-class remainder that is still short of its
    // global target. This keeps every class within one sample of
    // fraction * class size while the split totals match the
    // largest-remainder apportionment of the whole set.
    std::array<double, 3> global_rem;
    std::array<std::size_t, 3> targets = apportion(samples.size(), global_rem);
    std::array<std::size_t, 3> filled = {0, 0, 0};

    std::array<std::array<std::size_t, 3>, kNumClasses> counts{};
    for (int c = 0; c < kNumClasses; ++c) {
        const std::size_t n = by_class[c].size();
        for (int s = 0; s < 3; ++s) {
            double exact = frac[s] * static_cast<double>(n);
            counts[c][s] = static_cast<std::size_t>(std::floor(exact));
            filled[s] += counts[c][s];
        }
    }
    for (int c = 0; c < kNumClasses; ++c) {
        const std::size_t n = by_class[c].size();
        std::size_t assigned = counts[c][0] + counts[c][1] + counts[c][2];
        for (std::size_t k = assigned; k < n; ++k) {
            int best = -1;
            double best_rem = -1.0;
            for (int s = 0; s < 3; ++s) {
                if (filled[s] >= targets[s]) continue;
                double rem = frac[s] * static_cast<double>(n) -
                             std::floor(frac[s] * static_cast<double>(n));
                if (rem > best_rem) {
                    best_rem = rem;
                    best = s;
                }
            }
            if (best < 0)  // all targets met (degenerate fractions); fall back
                best = 0;
            ++counts[c][best];
            ++filled[best];
        }
    }

    for (int c = 0; c < kNumClasses; ++c) {
        auto& idx = by_class[c];
        if (idx.empty()) continue;
        rng.shuffle(idx);
        std::size_t pos = 0;
        for (int s = 0; s < 3; ++s)
            for (std::size_t k = 0; k < counts[c][s]; ++k)
                samples[idx[pos++]].split = static_cast<Split>(s);
    }
    return samples;
}

void write_manifest(std::ostream& out,
                    const std::vector<ManifestEntry>& entries) {
    csv::write_row(out, {"embedding_path", "class", "split"});
    for (const auto& e : entries)
        csv::write_row(out,
                       {e.embedding_path, to_string(e.cls), to_string(e.split)});
}

std::vector<ManifestEntry> read_manifest(std::istream& in,
                                         const std::string& source) {
    csv::Table t = csv::read_table(in, {}, source);
    std::size_t c_path = t.column("embedding_path");
    std::size_t c_cls = t.column("class");
    std::size_t c_split = t.column("split");
    std::vector<ManifestEntry> out;
    out.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        ManifestEntry e;
        e.embedding_path = r[c_path];
        if (r[c_cls] == "Active Playing")
            e.cls = SampleClass::ActivePlaying;
        else if (r[c_cls] == "Non-Active Playing")
            e.cls = SampleClass::NonActivePlaying;
        else if (r[c_cls] == "Not Playing")
            e.cls = SampleClass::NotPlaying;
        else
            throw csv::ParseError(source, i + 2,
                                  "unknown class '" + r[c_cls] + "'");
        if (r[c_split] == "train")
            e.split = Split::Train;
        else if (r[c_split] == "val")
            e.split = Split::Val;
        else if (r[c_split] == "test")
            e.split = Split::Test;
        else
            throw csv::ParseError(source, i + 2,
                                  "unknown split '" + r[c_split] + "'");
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace calfplay
