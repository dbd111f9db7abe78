#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace calfplay {

constexpr std::size_t kEmbeddingDim = 1024;

class DatasetError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmbeddingVector {
    std::vector<float> values;  // exactly kEmbeddingDim finite floats
    std::string source_path;
};

/// Raw little-endian float32 x 1024. Files starting with the numpy magic
/// have their header skipped for interoperability; the payload contract
/// is the same. Non-finite components are rejected.
EmbeddingVector load_embedding(const std::string& path);

enum class SampleClass { ActivePlaying = 0, NonActivePlaying = 1, NotPlaying = 2 };
constexpr int kNumClasses = 3;

std::string to_string(SampleClass c);

enum class Split { Train = 0, Val = 1, Test = 2 };

std::string to_string(Split s);

struct ManifestEntry {
    std::string embedding_path;
    SampleClass cls = SampleClass::NotPlaying;
    Split split = Split::Train;
};

/// Fisher-Yates shuffle driven by mt19937_64 with rejection-sampled
/// bounded draws, so the permutation depends only on the seed and the
/// algorithm, not on the standard library.
class DeterministicRng {
public:
    explicit DeterministicRng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, bound), bound > 0.
    std::uint64_t bounded(std::uint64_t bound);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[bounded(i)]);
    }

private:
    std::mt19937_64 engine_;
};

/// Downsamples every class uniformly at random to the minority-class
/// count, then reshuffles the combined set. Deterministic under seed.
std::vector<ManifestEntry> stratified_downsample(
    const std::vector<ManifestEntry>& samples, std::uint64_t seed);

struct SplitFractions {
    double train = 0.70;
    double val = 0.15;
    double test = 0.15;
};

/// Per-class split with largest-remainder rounding; each class's counts
/// per split are within one sample of fraction * class size.
std::vector<ManifestEntry> stratified_split(std::vector<ManifestEntry> samples,
                                            const SplitFractions& fractions,
                                            std::uint64_t seed);

void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(std::istream& in,
                                         const std::string& source = "");

}  // namespace calfplay
