// Pipeline orchestrator: ingest -> align -> filter -> metrics / fit-lmm
// and prepare -> train -> evaluate -> report. Every stage is idempotent
// for identical inputs and seeds; artifacts embed the config hash and
// seed so reruns are byte-comparable.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "calfplay/alignment.hpp"
#include "calfplay/csv.hpp"
#include "calfplay/dataset.hpp"
#include "calfplay/ethogram.hpp"
#include "calfplay/filtering.hpp"
#include "calfplay/lmm.hpp"
#include "calfplay/metrics.hpp"
#include "calfplay/mlp.hpp"
#include "calfplay/timing.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace calfplay;

namespace {

constexpr const char* kToolVersion = "calfplay 0.1.0";

// ---------------------------------------------------------------------
// Config: flat key=value with [sections]; flags > file > defaults.

class UserError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Config {
    std::map<std::string, std::string> values;  // "section.key" -> value

    std::string get(const std::string& key, const std::string& dflt = "") const {
        auto it = values.find(key);
        return it == values.end() ? dflt : it->second;
    }
    double get_double(const std::string& key, double dflt) const {
        auto it = values.find(key);
        return it == values.end() ? dflt : std::stod(it->second);
    }
    std::int64_t get_int(const std::string& key, std::int64_t dflt) const {
        auto it = values.find(key);
        return it == values.end() ? dflt : std::stoll(it->second);
    }
    std::string require(const std::string& key) const {
        auto it = values.find(key);
        if (it == values.end() || it->second.empty())
            throw UserError("config key '" + key + "' is required");
        return it->second;
    }
};

std::string strip(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

Config load_config(const std::string& path) {
    Config cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw UserError("cannot open config file: " + path);
    std::string line, section;
    while (std::getline(in, line)) {
        std::string t = strip(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = strip(t.substr(1, t.size() - 2));
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw UserError("config line without '=': " + line);
        std::string key = strip(t.substr(0, eq));
        std::string value = strip(t.substr(eq + 1));
        cfg.values[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
}

std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string config_hash(const Config& cfg) {
    std::string canonical;  // std::map keeps keys sorted
    for (const auto& [k, v] : cfg.values) canonical += k + "=" + v + "\n";
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(canonical)));
    return buf;
}

json provenance(const Config& cfg) {
    json p;
    p["config_hash"] = config_hash(cfg);
    p["seed"] = cfg.get_int("seed", 42);
    p["tool"] = kToolVersion;
    return p;
}

void write_provenance_sidecar(const Config& cfg, const fs::path& artifact) {
    std::ofstream out(artifact.string() + ".provenance.json");
    out << provenance(cfg).dump(2) << '\n';
}

fs::path out_dir(const Config& cfg) {
    const char* env = std::getenv("CALFPLAY_OUT");
    fs::path dir = env && *env ? fs::path(env)
                               : fs::path(cfg.get("output.dir", "out"));
    fs::create_directories(dir);
    return dir;
}

void require_artifact(const fs::path& p, const std::string& producer) {
    if (!fs::exists(p))
        throw UserError("missing artifact " + p.string() + "; run '" +
                        producer + "' first");
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw UserError("cannot write " + p.string());
    return out;
}

EthogramTable load_ethogram(const Config& cfg) {
    std::string path = cfg.get("inputs.ethogram");
    return path.empty() ? EthogramTable::builtin()
                        : EthogramTable::load_file(path);
}

// ---------------------------------------------------------------------
// Input readers beyond the library ones.

std::vector<FrameMeta> read_frames(const std::string& path) {
    csv::Table t = csv::read_table_file(path);
    auto col = [&](const char* c) { return t.column(c); };
    std::size_t c_ts = col("timestamp"), c_id = col("tracking_id"),
                c_x = col("x"), c_y = col("y"), c_w = col("w"), c_h = col("h"),
                c_conf = col("confidence"), c_int = col("mean_intensity"),
                c_occ = col("occlusion_fraction"), c_crop = col("crop_path"),
                c_emb = col("embedding_path");
    std::optional<std::size_t> c_mask;
    if (t.has_column("mask_area")) c_mask = t.column("mask_area");
    std::vector<FrameMeta> out;
    out.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        FrameMeta f;
        auto ts = parse_timestamp_iso(r[c_ts]);
        if (!ts) ts = parse_timestamp(r[c_ts]);
        if (!ts)
            throw csv::ParseError(path, i + 2, "bad timestamp '" + r[c_ts] + "'");
        f.timestamp = *ts;
        f.tracking_id = std::stoi(r[c_id]);
        f.x = std::stod(r[c_x]);
        f.y = std::stod(r[c_y]);
        f.w = std::stod(r[c_w]);
        f.h = std::stod(r[c_h]);
        f.confidence = std::stod(r[c_conf]);
        f.mean_intensity = std::stod(r[c_int]);
        f.occlusion_fraction = std::stod(r[c_occ]);
        if (c_mask && !r[*c_mask].empty()) f.mask_area_px = std::stod(r[*c_mask]);
        f.crop_path = r[c_crop];
        f.embedding_path = r[c_emb];
        out.push_back(std::move(f));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const FrameMeta& a, const FrameMeta& b) {
                         return a.timestamp < b.timestamp;
                     });
    return out;
}

std::vector<CalfRecord> read_calves(const std::string& path) {
    csv::Table t = csv::read_table_file(path);
    auto col = [&](const char* c) { return t.column(c); };
    std::size_t c_id = col("calf_id"), c_farm = col("farm_id"),
                c_age = col("age_days"), c_health = col("health_category"),
                c_space = col("space_m2"), c_group = col("group_size"),
                c_milk = col("milk_l_day"), c_bed = col("bedding_score"),
                c_bw = col("body_weight_kg");
    std::vector<CalfRecord> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        CalfRecord c;
        c.calf_id = r[c_id];
        c.farm_id = r[c_farm];
        c.age_days = std::stoi(r[c_age]);
        c.health_category = std::stoi(r[c_health]);
        c.space_m2 = std::stod(r[c_space]);
        c.group_size = std::stoi(r[c_group]);
        c.milk_l_day = std::stod(r[c_milk]);
        c.bedding_score = std::stoi(r[c_bed]);
        c.body_weight_kg = std::stod(r[c_bw]);
        if (c.health_category < 1 || c.health_category > 3)
            throw csv::ParseError(path, i + 2,
                                  "health_category outside 1..3 (category 4 "
                                  "calves are excluded upstream)");
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<OcrReading> read_ocr_file(const std::string& path) {
    csv::Table t = csv::read_table_file(path);
    std::size_t c_idx = t.column("frame_index");
    std::size_t c_raw = t.column("raw_string");
    std::vector<OcrReading> out;
    out.reserve(t.rows.size());
    for (const auto& r : t.rows)
        out.push_back(read_ocr(std::stoll(r[c_idx]), r[c_raw]));
    std::stable_sort(out.begin(), out.end(),
                     [](const OcrReading& a, const OcrReading& b) {
                         return a.frame_index < b.frame_index;
                     });
    return out;
}

// Intervals persisted between ingest and the downstream stages.
void write_intervals(std::ostream& out,
                     const std::vector<BehaviourInterval>& intervals,
                     Timestamp video_start) {
    csv::write_row(out, {"subject", "behaviour", "category", "play", "start_s",
                         "stop_s", "start_abs", "stop_abs"});
    for (const auto& iv : intervals) {
        csv::write_row(
            out, {iv.subject, iv.behaviour, to_string(iv.category),
                  iv.play ? "1" : "0", format_decisecs(iv.start),
                  format_decisecs(iv.stop),
                  format_timestamp_iso(annotation_to_absolute(video_start, iv.start)),
                  format_timestamp_iso(annotation_to_absolute(video_start, iv.stop))});
    }
}

struct StoredInterval {
    BehaviourInterval interval;
    Timestamp start_abs;
    Timestamp stop_abs;
};

std::vector<StoredInterval> read_intervals(const std::string& path) {
    csv::Table t = csv::read_table_file(path);
    auto col = [&](const char* c) { return t.column(c); };
    std::size_t c_subj = col("subject"), c_beh = col("behaviour"),
                c_cat = col("category"), c_play = col("play"),
                c_start = col("start_s"), c_stop = col("stop_s"),
                c_sa = col("start_abs"), c_so = col("stop_abs");
    std::vector<StoredInterval> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        StoredInterval s;
        s.interval.subject = r[c_subj];
        s.interval.behaviour = r[c_beh];
        auto cat = category_from_string(r[c_cat]);
        if (!cat) throw csv::ParseError(path, i + 2, "bad category");
        s.interval.category = *cat;
        s.interval.play = r[c_play] == "1";
        s.interval.start = *parse_decisecs(r[c_start]);
        s.interval.stop = *parse_decisecs(r[c_stop]);
        s.start_abs = *parse_timestamp_iso(r[c_sa]);
        s.stop_abs = *parse_timestamp_iso(r[c_so]);
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------
// Stages.

int cmd_ingest(const Config& cfg) {
    fs::path dir = out_dir(cfg);
    EthogramTable table = load_ethogram(cfg);
    VideoDescriptor video = parse_video_filename(cfg.require("inputs.video"));

    std::ifstream events_in(cfg.require("inputs.events"));
    if (!events_in)
        throw UserError("cannot open events file: " + cfg.get("inputs.events"));
    EventLogDialect dialect;
    std::string delim = cfg.get("inputs.delimiter", ",");
    if (!delim.empty()) dialect.csv.delimiter = delim[0];
    auto events =
        parse_event_log(events_in, dialect, cfg.get("inputs.events"));
    PairingResult pairing = pair_state_events(events, table);

    json report;
    report["provenance"] = provenance(cfg);
    report["video"] = {{"farm", video.farm},
                       {"camera", video.camera},
                       {"start_time", format_timestamp_iso(video.start_time)}};
    report["events"] = events.size();
    report["intervals"] = pairing.intervals.size();
    report["warnings"] = pairing.warnings;

    if (!cfg.get("inputs.ocr").empty()) {
        auto readings = read_ocr_file(cfg.get("inputs.ocr"));
        auto series = validate_timestamp_series(
            std::move(readings), cfg.get_double("inputs.fps", 1.0));
        json ocr;
        ocr["total_frames"] = series.report.total_frames;
        ocr["successful"] = series.report.successful;
        ocr["success_rate_pct"] = series.report.success_rate_pct;
        ocr["repaired"] = series.report.repaired;
        ocr["unresolved"] = series.report.unresolved;
        ocr["monotonicity_violations"] = series.report.monotonicity_violations;
        report["ocr"] = ocr;
    }

    // Sanity pass over the remaining inputs so schema errors fail here.
    if (!cfg.get("inputs.frames").empty())
        report["frames"] = read_frames(cfg.get("inputs.frames")).size();
    if (!cfg.get("inputs.calves").empty())
        report["calves"] = read_calves(cfg.get("inputs.calves")).size();

    {
        auto out = open_out(dir / "intervals.csv");
        write_intervals(out, pairing.intervals, video.start_time);
    }
    write_provenance_sidecar(cfg, dir / "intervals.csv");
    open_out(dir / "ingest_report.json") << report.dump(2) << '\n';
    std::cout << "ingest: " << events.size() << " events, "
              << pairing.intervals.size() << " intervals\n";
    return 0;
}

int cmd_align(const Config& cfg) {
    fs::path dir = out_dir(cfg);
    require_artifact(dir / "intervals.csv", "ingest");
    EthogramTable table = load_ethogram(cfg);
    auto stored = read_intervals((dir / "intervals.csv").string());
    auto frames = read_frames(cfg.require("inputs.frames"));

    std::vector<TimedState> states;
    states.reserve(stored.size());
    for (const auto& s : stored) {
        const auto& entry = table.classify(s.interval.behaviour);
        states.push_back(TimedState{s.interval.behaviour, entry.activity,
                                    s.start_abs, s.stop_abs});
    }

    std::vector<Timestamp> event_times;
    event_times.reserve(states.size());
    for (const auto& s : states) event_times.push_back(s.start);
    auto match = match_annotations_to_frames(
        event_times, frames, cfg.get_double("align.tolerance_s", 0.5));

    auto samples = build_aligned_samples(states, frames);
    {
        auto out = open_out(dir / "metadata.csv");
        build_metadata_table(out, samples);
    }
    write_provenance_sidecar(cfg, dir / "metadata.csv");

    json report;
    report["provenance"] = provenance(cfg);
    report["frames"] = frames.size();
    report["samples"] = samples.size();
    report["matched_events"] = match.matches.size();
    report["unmatched_events"] = match.unmatched_events.size();
    report["unmatched_frames"] = match.unmatched_frames.size();
    open_out(dir / "align_report.json") << report.dump(2) << '\n';
    std::cout << "align: " << samples.size() << " samples, "
              << match.unmatched_events.size() << " unmatched events\n";
    return 0;
}

FilterConfig filter_config(const Config& cfg) {
    FilterConfig fc;
    fc.min_confidence = cfg.get_double("filter.min_confidence", fc.min_confidence);
    fc.max_out_of_view_s =
        cfg.get_double("filter.max_out_of_view_s", fc.max_out_of_view_s);
    fc.max_occlusion_fraction = cfg.get_double("filter.max_occlusion_fraction",
                                               fc.max_occlusion_fraction);
    fc.min_bbox_px = cfg.get_double("filter.min_bbox_px", fc.min_bbox_px);
    fc.min_intensity = cfg.get_double("filter.min_intensity", fc.min_intensity);
    fc.max_intensity = cfg.get_double("filter.max_intensity", fc.max_intensity);
    fc.max_mask_area_ratio =
        cfg.get_double("filter.max_mask_area_ratio", fc.max_mask_area_ratio);
    return fc;
}

int cmd_filter(const Config& cfg) {
    fs::path dir = out_dir(cfg);
    require_artifact(dir / "metadata.csv", "align");
    std::ifstream in(dir / "metadata.csv");
    auto samples = read_metadata_table(in, (dir / "metadata.csv").string());
    FilterConfig fc = filter_config(cfg);

    // Confidence gate first, then the frame-exclusion criteria.
    std::vector<AlignedSample> confident;
    std::size_t low_confidence = 0;
    for (const auto& s : samples) {
        if (s.confidence >= fc.min_confidence)
            confident.push_back(s);
        else
            ++low_confidence;
    }
    auto result = exclude_frames(confident, fc);

    {
        auto out = open_out(dir / "training_eligible.csv");
        build_metadata_table(out, result.retained);
    }
    write_provenance_sidecar(cfg, dir / "training_eligible.csv");
    {
        auto out = open_out(dir / "exclusion_report.jsonl");
        json head;
        head["provenance"] = provenance(cfg);
        head["low_confidence"] = low_confidence;
        out << head.dump() << '\n';
        write_exclusion_report(out, result.report);
    }
    std::cout << "filter: retained " << result.retained.size() << " of "
              << samples.size() << "\n";
    return 0;
}

int cmd_metrics(const Config& cfg) {
    fs::path dir = out_dir(cfg);
    require_artifact(dir / "intervals.csv", "ingest");
    auto stored = read_intervals((dir / "intervals.csv").string());
    auto calves = read_calves(cfg.require("inputs.calves"));
    double obs_s =
        cfg.get_double("metrics.observation_seconds", kDefaultObservationSeconds);

    std::map<std::string, std::vector<BehaviourInterval>> by_calf;
    for (const auto& s : stored) by_calf[s.interval.subject].push_back(s.interval);

    auto out = open_out(dir / "play_summary.csv");
    csv::write_row(out, {"calf_id", "farm_id", "space_m2", "space_category",
                         "percent_op_total", "percent_op_locomotor",
                         "percent_op_social", "percent_op_object",
                         "percent_op_straw", "events_per_hour_total",
                         "observation_seconds"});
    auto pct = [](const PlaySummary& s, BehaviourCategory c) {
        auto it = s.percent_op_by_category.find(c);
        return it == s.percent_op_by_category.end() ? 0.0 : it->second;
    };
    auto num = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.10g", v);
        return std::string(buf);
    };
    for (const auto& calf : calves) {
        auto it = by_calf.find(calf.calf_id);
        std::vector<BehaviourInterval> empty;
        const auto& intervals = it == by_calf.end() ? empty : it->second;
        PlaySummary s = play_summary(intervals, obs_s);
        csv::write_row(
            out, {calf.calf_id, calf.farm_id, num(calf.space_m2),
                  to_string(categorize_space(calf.space_m2)),
                  num(s.percent_op_total),
                  num(pct(s, BehaviourCategory::Locomotor)),
                  num(pct(s, BehaviourCategory::Social)),
                  num(pct(s, BehaviourCategory::Object)),
                  num(pct(s, BehaviourCategory::Straw)),
                  num(s.events_per_hour_total), num(obs_s)});
    }
    write_provenance_sidecar(cfg, dir / "play_summary.csv");
    std::cout << "metrics: " << calves.size() << " calves\n";
    return 0;
}

int cmd_fit_lmm(const Config& cfg) {
    fs::path dir = out_dir(cfg);
    require_artifact(dir / "play_summary.csv", "metrics");
    csv::Table t = csv::read_table_file((dir / "play_summary.csv").string());
    std::size_t c_pct = t.column(cfg.get("lmm.response", "percent_op_total"));
    std::size_t c_farm = t.column("farm_id");
    std::size_t c_cat = t.column("space_category");

    std::vector<double> y;
    std::vector<std::string> farm, category;
    for (const auto& r : t.rows) {
        y.push_back(std::stod(r[c_pct]));
        farm.push_back(r[c_farm]);
        category.push_back(r[c_cat]);
    }
    const std::size_t n = y.size();
    if (n == 0) throw UserError("play_summary.csv has no rows");

    std::map<std::string, int> farm_index;
    std::vector<int> groups(n);
    for (std::size_t i = 0; i < n; ++i)
        groups[i] = farm_index.emplace(farm[i], static_cast<int>(farm_index.size()))
                        .first->second;

    std::vector<std::string> levels;  // observed, first = reference
    for (const auto& c : category)
        if (std::find(levels.begin(), levels.end(), c) == levels.end())
            levels.push_back(c);
    std::sort(levels.begin(), levels.end());

    LmmSpec spec;
    spec.y = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(n));
    spec.group = groups;
    spec.design.resize(static_cast<Eigen::Index>(n),
                       static_cast<Eigen::Index>(levels.size()));
    spec.design.setZero();
    spec.design.col(0).setOnes();
    spec.column_names.push_back("(intercept)");
    std::vector<int> level_cols(levels.size(), -1);
    for (std::size_t l = 1; l < levels.size(); ++l) {
        spec.column_names.push_back("space:" + levels[l]);
        level_cols[l] = static_cast<int>(l);
        for (std::size_t i = 0; i < n; ++i)
            if (category[i] == levels[l])
                spec.design(static_cast<Eigen::Index>(i),
                            static_cast<Eigen::Index>(l)) = 1.0;
    }

    LmmOptions opts;
    opts.reml = cfg.get("lmm.reml", "false") == "true";
    LmmFit fit = fit_random_intercept(spec, opts);

    LmmSpec null_spec;
    null_spec.y = spec.y;
    null_spec.group = spec.group;
    null_spec.design = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n), 1);
    null_spec.column_names = {"(intercept)"};
    LmmFit null_fit = fit_random_intercept(null_spec, opts);

    auto ic = information_criteria(fit);
    auto r2 = r_squared(fit, null_fit);
    auto lrt = lr_test(fit, null_fit);
    auto pairs = lsd_pairwise(fit, levels, level_cols);
    auto diag = diagnostics(fit, groups);

    json report;
    report["provenance"] = provenance(cfg);
    report["n_obs"] = fit.n_obs;
    report["n_farms"] = fit.n_groups;
    json coef = json::array();
    for (Eigen::Index i = 0; i < fit.beta.size(); ++i)
        coef.push_back({{"name", fit.column_names[i]},
                        {"estimate", fit.beta[i]},
                        {"std_error", std::sqrt(fit.cov_beta(i, i))}});
    report["coefficients"] = coef;
    report["sigma2_farm"] = fit.sigma2_group;
    report["sigma2_residual"] = fit.sigma2_resid;
    report["loglik"] = fit.loglik;
    report["icc"] = icc(fit);
    report["r2_marginal"] = r2.marginal;
    report["r2_conditional"] = r2.conditional;
    report["aic"] = ic.aic;
    report["bic"] = ic.bic;
    report["lr_vs_null"] = {{"chi2", lrt.chi2}, {"df", lrt.df}, {"p", lrt.p}};
    json pw = json::array();
    for (const auto& p : pairs)
        pw.push_back({{"a", p.level_a},
                      {"b", p.level_b},
                      {"difference", p.difference},
                      {"std_error", p.std_error},
                      {"t", p.t},
                      {"df", p.df},
                      {"p", p.p}});
    report["lsd_pairwise"] = pw;
    report["levene"] = {{"statistic", diag.levene.statistic},
                        {"p", diag.levene.p},
                        {"df1", diag.levene.df1},
                        {"df2", diag.levene.df2},
                        {"warnings", diag.levene.warnings}};
    open_out(dir / "lmm_report.json") << report.dump(2) << '\n';

    {
        auto txt = open_out(dir / "lmm_report.txt");
        txt << "Random-intercept model (farm), "
            << (opts.reml ? "REML" : "ML") << " estimation\n";
        txt << "n=" << fit.n_obs << " farms=" << fit.n_groups << "\n\n";
        txt << "coefficient                 estimate     std.err\n";
        for (Eigen::Index i = 0; i < fit.beta.size(); ++i) {
            char line[128];
            std::snprintf(line, sizeof line, "%-24s %11.5f %11.5f\n",
                          fit.column_names[i].c_str(), fit.beta[i],
                          std::sqrt(fit.cov_beta(i, i)));
            txt << line;
        }
        char line[256];
        std::snprintf(line, sizeof line,
                      "\nsigma2_farm=%.6f sigma2_resid=%.6f ICC=%.4f\n"
                      "R2 marginal=%.4f conditional=%.4f\n"
                      "logLik=%.4f AIC=%.3f BIC=%.3f\n"
                      "LR vs null: chi2=%.4f df=%zu p=%.4g\n"
                      "Levene (Brown-Forsythe): F=%.4f p=%.4g\n\n",
                      fit.sigma2_group, fit.sigma2_resid, icc(fit), r2.marginal,
                      r2.conditional, fit.loglik, ic.aic, ic.bic, lrt.chi2,
                      lrt.df, lrt.p, diag.levene.statistic, diag.levene.p);
        txt << line;
        txt << "LSD pairwise comparisons (unadjusted):\n";
        for (const auto& p : pairs) {
            const char* marker = p.p < 0.01 ? "##" : (p.p < 0.05 ? "#" : "");
            std::snprintf(line, sizeof line,
                          "  %-7s vs %-7s diff=%9.5f se=%8.5f t=%7.3f p=%.4g %s\n",
                          p.level_a.c_str(), p.level_b.c_str(), p.difference,
                          p.std_error, p.t, p.p, marker);
            txt << line;
        }
    }
    {
        auto res = open_out(dir / "residuals.csv");
        csv::write_row(res, {"calf_id", "farm_id", "std_residual"});
        std::size_t c_id = t.column("calf_id");
        for (std::size_t i = 0; i < n; ++i) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.10g",
                          fit.std_residuals[static_cast<Eigen::Index>(i)]);
            csv::write_row(res, {t.rows[i][c_id], farm[i], buf});
        }
    }
    write_provenance_sidecar(cfg, dir / "residuals.csv");
    std::cout << "fit-lmm: ICC=" << icc(fit) << " AIC=" << ic.aic << "\n";
    return 0;
}

int cmd_prepare(const Config& cfg) {
    fs::path dir = out_dir(cfg);
    require_artifact(dir / "training_eligible.csv", "filter");
    std::ifstream in(dir / "training_eligible.csv");
    auto samples =
        read_metadata_table(in, (dir / "training_eligible.csv").string());

    std::vector<ManifestEntry> entries;
    for (const auto& s : samples) {
        ManifestEntry e;
        e.embedding_path = s.embedding_path;
        switch (s.final_label) {
            case FinalLabel::ActivePlaying:
                e.cls = SampleClass::ActivePlaying;
                break;
            case FinalLabel::NonActivePlaying:
                e.cls = SampleClass::NonActivePlaying;
                break;
            case FinalLabel::NotPlaying:
                e.cls = SampleClass::NotPlaying;
                break;
            default:
                continue;  // Management / Out of View never train
        }
        entries.push_back(std::move(e));
    }

    std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("seed", 42));
    auto balanced = stratified_downsample(entries, seed);
    SplitFractions fractions;
    fractions.train = cfg.get_double("split.train", 0.70);
    fractions.val = cfg.get_double("split.val", 0.15);
    fractions.test = cfg.get_double("split.test", 0.15);
    auto assigned = stratified_split(std::move(balanced), fractions, seed + 1);

    {
        auto out = open_out(dir / "manifest.csv");
        write_manifest(out, assigned);
    }
    write_provenance_sidecar(cfg, dir / "manifest.csv");
    std::cout << "prepare: " << assigned.size() << " balanced samples\n";
    return 0;
}

LabelledMatrix load_split(const std::vector<ManifestEntry>& manifest,
                          Split split, const std::string& root, int jobs) {
    std::vector<const ManifestEntry*> wanted;
    for (const auto& e : manifest)
        if (e.split == split) wanted.push_back(&e);
    LabelledMatrix set;
    set.x.resize(static_cast<Eigen::Index>(wanted.size()), kMlpInput);
    set.y.resize(wanted.size());

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < wanted.size();) {
            if (failed.load()) return;
            try {
                fs::path p = root.empty() ? fs::path(wanted[i]->embedding_path)
                                          : fs::path(root) /
                                                wanted[i]->embedding_path;
                EmbeddingVector v = load_embedding(p.string());
                for (int c = 0; c < kMlpInput; ++c)
                    set.x(static_cast<Eigen::Index>(i), c) = v.values[c];
                set.y[i] = static_cast<int>(wanted[i]->cls);
            } catch (const std::exception& ex) {
                std::scoped_lock lock(error_mutex);
                error = ex.what();
                failed = true;
            }
        }
    };
    int workers = std::max(1, jobs);
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (failed) throw UserError(error);
    return set;
}

TrainConfig train_config(const Config& cfg) {
    TrainConfig tc;
    tc.learning_rate =
        static_cast<float>(cfg.get_double("train.learning_rate", 0.001));
    tc.weight_decay =
        static_cast<float>(cfg.get_double("train.weight_decay", 1e-5));
    tc.batch_size = static_cast<int>(cfg.get_int("train.batch_size", 64));
    tc.dropout_p = static_cast<float>(cfg.get_double("train.dropout_p", 0.5));
    tc.max_epochs = static_cast<int>(cfg.get_int("train.max_epochs", 50));
    tc.patience = static_cast<int>(cfg.get_int("train.patience", 5));
    tc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 42));
    return tc;
}

int cmd_train(const Config& cfg, int jobs) {
    fs::path dir = out_dir(cfg);
    require_artifact(dir / "manifest.csv", "prepare");
    std::ifstream in(dir / "manifest.csv");
    auto manifest = read_manifest(in, (dir / "manifest.csv").string());
    std::string root = cfg.get("inputs.embeddings_root");

    LabelledMatrix train_set = load_split(manifest, Split::Train, root, jobs);
    LabelledMatrix val_set = load_split(manifest, Split::Val, root, jobs);

    TrainConfig tc = train_config(cfg);
    TrainResult result = train(train_set, val_set, tc);

    save_checkpoint((dir / "checkpoint.bin").string(), result.best_params, tc);
    {
        auto out = open_out(dir / "runlog.jsonl");
        json head;
        head["provenance"] = provenance(cfg);
        head["hyperparameters"] = {
            {"learning_rate", tc.learning_rate},
            {"weight_decay", tc.weight_decay},
            {"batch_size", tc.batch_size},
            {"dropout_p", tc.dropout_p},
            {"max_epochs", tc.max_epochs},
            {"patience", tc.patience},
            {"seed", tc.seed},
            {"architecture", "1024-512-256-3 ReLU, inverted dropout"},
            {"init", "fan-in uniform, zero biases"},
            {"optimizer", "adam b1=0.9 b2=0.999 eps=1e-8, coupled L2"}};
        head["parameter_count"] = result.best_params.parameter_count();
        out << head.dump() << '\n';
        for (const auto& e : result.epochs) {
            json j;
            j["epoch"] = e.epoch;
            j["train_loss"] = e.train_loss;
            j["train_accuracy"] = e.train_accuracy;
            j["val_loss"] = e.val_loss;
            j["val_accuracy"] = e.val_accuracy;
            j["improved"] = e.improved;
            out << j.dump() << '\n';
        }
        json tail;
        tail["best_epoch"] = result.best_epoch;
        tail["best_val_loss"] = result.best_val_loss;
        out << tail.dump() << '\n';
    }
    std::cout << "train: best epoch " << result.best_epoch << " val loss "
              << result.best_val_loss << "\n";
    return 0;
}

int cmd_evaluate(const Config& cfg, int jobs) {
    fs::path dir = out_dir(cfg);
    require_artifact(dir / "checkpoint.bin", "train");
    require_artifact(dir / "manifest.csv", "prepare");
    std::ifstream in(dir / "manifest.csv");
    auto manifest = read_manifest(in, (dir / "manifest.csv").string());
    MlpParams params = load_checkpoint((dir / "checkpoint.bin").string());
    LabelledMatrix test_set = load_split(manifest, Split::Test,
                                         cfg.get("inputs.embeddings_root"), jobs);
    EvalReport report = evaluate(params, test_set);

    json j;
    j["provenance"] = provenance(cfg);
    j["accuracy"] = report.accuracy;
    j["total"] = report.total;
    json per_class = json::array();
    for (int c = 0; c < kMlpOutput; ++c) {
        json pc;
        pc["class"] = to_string(static_cast<SampleClass>(c));
        pc["support"] = report.support[c];
        pc["precision"] = report.precision[c] ? json(*report.precision[c])
                                              : json(nullptr);
        pc["recall"] =
            report.recall[c] ? json(*report.recall[c]) : json(nullptr);
        pc["f1"] = report.f1[c] ? json(*report.f1[c]) : json(nullptr);
        per_class.push_back(pc);
    }
    j["per_class"] = per_class;
    json conf = json::array();
    for (int t = 0; t < kMlpOutput; ++t) {
        json row = json::array();
        for (int p = 0; p < kMlpOutput; ++p) row.push_back(report.confusion[t][p]);
        conf.push_back(row);
    }
    j["confusion_counts"] = conf;
    json confpct = json::array();
    for (int t = 0; t < kMlpOutput; ++t) {
        json row = json::array();
        for (int p = 0; p < kMlpOutput; ++p) row.push_back(report.row_percent(t, p));
        confpct.push_back(row);
    }
    j["confusion_row_pct"] = confpct;
    open_out(dir / "eval_report.json") << j.dump(2) << '\n';

    {
        auto txt = open_out(dir / "eval_report.txt");
        char line[160];
        std::snprintf(line, sizeof line, "accuracy %.4f on %zu samples\n\n",
                      report.accuracy, report.total);
        txt << line;
        txt << "class                  precision   recall       f1  support\n";
        for (int c = 0; c < kMlpOutput; ++c) {
            auto fmt = [](const std::optional<double>& v) {
                char b[16];
                if (v)
                    std::snprintf(b, sizeof b, "%8.4f", *v);
                else
                    std::snprintf(b, sizeof b, "%8s", "n/a");
                return std::string(b);
            };
            std::snprintf(line, sizeof line, "%-22s %s %s %s %8zu\n",
                          to_string(static_cast<SampleClass>(c)).c_str(),
                          fmt(report.precision[c]).c_str(),
                          fmt(report.recall[c]).c_str(),
                          fmt(report.f1[c]).c_str(), report.support[c]);
            txt << line;
        }
        txt << "\nconfusion (rows=true, % of true class):\n";
        for (int t = 0; t < kMlpOutput; ++t) {
            std::string row = "  ";
            for (int p = 0; p < kMlpOutput; ++p) {
                std::snprintf(line, sizeof line, "%7.1f%%", report.row_percent(t, p));
                row += line;
            }
            txt << row << "\n";
        }
    }
    std::cout << "evaluate: accuracy " << report.accuracy << "\n";
    return 0;
}

int cmd_report(const Config& cfg) {
    fs::path dir = out_dir(cfg);
    auto txt = open_out(dir / "report.txt");
    txt << kToolVersion << " consolidated report\n";
    txt << "config hash " << config_hash(cfg) << ", seed "
        << cfg.get_int("seed", 42) << "\n\n";
    auto append_json = [&](const fs::path& p, const std::string& title) {
        if (!fs::exists(p)) return;
        std::ifstream in(p);
        json j = json::parse(in);
        j.erase("provenance");
        txt << "== " << title << " ==\n" << j.dump(2) << "\n\n";
    };
    append_json(dir / "ingest_report.json", "ingest");
    append_json(dir / "align_report.json", "alignment");
    append_json(dir / "lmm_report.json", "mixed model");
    append_json(dir / "eval_report.json", "classifier evaluation");
    if (fs::exists(dir / "exclusion_report.jsonl")) {
        txt << "== exclusions ==\n";
        std::ifstream in(dir / "exclusion_report.jsonl");
        std::string line;
        while (std::getline(in, line)) txt << line << "\n";
        txt << "\n";
    }
    std::cout << "report: written to " << (dir / "report.txt").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"behavioural event / tracking / embedding pipeline"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand

    std::string config_path;
    std::vector<std::string> overrides;
    int jobs = 1;
    app.add_option("--config", config_path, "flat key=value config file");
    app.add_option("--set", overrides,
                   "override config values, section.key=value");
    app.add_option("--jobs", jobs, "worker cap for parallel stages");
    app.set_version_flag("--version", kToolVersion);

    auto* ingest = app.add_subcommand("ingest", "parse and validate inputs");
    auto* align = app.add_subcommand("align", "build the metadata table");
    auto* filter = app.add_subcommand("filter", "apply frame exclusions");
    auto* metrics = app.add_subcommand("metrics", "per-calf play summaries");
    auto* fit_lmm = app.add_subcommand("fit-lmm", "space-allowance mixed model");
    auto* prepare = app.add_subcommand("prepare", "balance and split dataset");
    auto* train_cmd = app.add_subcommand("train", "train the classifier");
    auto* evaluate_cmd = app.add_subcommand("evaluate", "evaluate on test split");
    auto* report = app.add_subcommand("report", "consolidated summary");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Usage mistakes exit 2; --help/--version exit 0.
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        Config cfg = load_config(config_path);
        for (const auto& o : overrides) {
            auto eq = o.find('=');
            if (eq == std::string::npos)
                throw UserError("--set expects section.key=value: " + o);
            cfg.values[o.substr(0, eq)] = o.substr(eq + 1);
        }

        if (ingest->parsed()) return cmd_ingest(cfg);
        if (align->parsed()) return cmd_align(cfg);
        if (filter->parsed()) return cmd_filter(cfg);
        if (metrics->parsed()) return cmd_metrics(cfg);
        if (fit_lmm->parsed()) return cmd_fit_lmm(cfg);
        if (prepare->parsed()) return cmd_prepare(cfg);
        if (train_cmd->parsed()) return cmd_train(cfg, jobs);
        if (evaluate_cmd->parsed()) return cmd_evaluate(cfg, jobs);
        if (report->parsed()) return cmd_report(cfg);
        return 1;
    } catch (const UserError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const csv::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const TimingError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DatasetError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const MetricsError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const PairingError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const LmmError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
