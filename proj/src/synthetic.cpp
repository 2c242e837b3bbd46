#include "epcgaze/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "epcgaze/errors.hpp"
#include "epcgaze/text.hpp"

namespace epcgaze {

void GeneratorConfig::validate() const {
    if (n_subjects < 3) throw ConfigError("n_subjects must be >= 3");
    if (samples_per_subject < 1) throw ConfigError("samples_per_subject must be >= 1");
    if (input_dim < 1 || true_map_hidden < 1) throw ConfigError("generator dimensions must be >= 1");
    if (!(yaw_min < yaw_max) || !(pitch_min < pitch_max)) throw ConfigError("empty gaze range");
    if (std::max({std::abs(yaw_min), std::abs(yaw_max), std::abs(pitch_min), std::abs(pitch_max)}) >
        1.5707963267948966) {
        throw ConfigError("gaze range must lie within [-pi/2, pi/2]");
    }
    if (!(bias_shift_max >= 0.0) || !(bias_shift_sigma >= 0.0) || !(offset_scale >= 0.0) ||
        !(noise_sigma >= 0.0)) {
        throw ConfigError("bias shift, offset_scale and noise_sigma parameters must be >= 0");
    }
    if (!(gain_spread >= 0.0 && gain_spread < 1.0)) throw ConfigError("gain_spread must be in [0, 1)");
}

Eigen::VectorXd TrueFeatureMap::operator()(const GazeAngles& g) const {
    const Eigen::VectorXd h = (w1 * Eigen::Vector2d(g.yaw, g.pitch) + b1).array().tanh().matrix();
    return w2 * h;
}

std::vector<int> World::subject_ids() const {
    std::vector<int> ids;
    ids.reserve(subjects.size());
    for (const SubjectProfile& s : subjects) ids.push_back(s.subject_id);
    return ids;
}

TrueFeatureMap make_true_map(const GeneratorConfig& cfg, Rng& rng) {
    const auto hidden = static_cast<Eigen::Index>(cfg.true_map_hidden);
    const auto dim = static_cast<Eigen::Index>(cfg.input_dim);
    TrueFeatureMap m;
    m.w1.resize(hidden, 2);
    m.b1.resize(hidden);
    m.w2.resize(dim, hidden);
    for (Eigen::Index i = 0; i < hidden; ++i) {
        m.w1(i, 0) = 2.0 * rng.normal();
        m.w1(i, 1) = 2.0 * rng.normal();
        m.b1(i) = rng.uniform(-1.0, 1.0);
    }
    const double w2_scale = std::sqrt(2.0 / static_cast<double>(hidden));
    for (Eigen::Index j = 0; j < hidden; ++j) {
        for (Eigen::Index i = 0; i < dim; ++i) m.w2(i, j) = w2_scale * rng.normal();
    }
    return m;
}

std::vector<SubjectProfile> make_profiles(const GeneratorConfig& cfg, Rng& rng) {
    std::vector<SubjectProfile> out;
    out.reserve(cfg.n_subjects);
    for (std::size_t s = 0; s < cfg.n_subjects; ++s) {
        const int id = static_cast<int>(s) + 1;
        Rng r = rng.derive(static_cast<std::uint64_t>(cfg.identical_subjects ? 1 : id));
        SubjectProfile p;
        p.subject_id = id;
        auto draw_shift = [&] {
            if (cfg.bias_shift_uniform) return r.uniform(-cfg.bias_shift_max, cfg.bias_shift_max);
            return std::clamp(cfg.bias_shift_sigma * r.normal(), -cfg.bias_shift_max, cfg.bias_shift_max);
        };
        p.bias_shift.yaw = draw_shift();
        p.bias_shift.pitch = draw_shift();
        p.feature_offset.resize(static_cast<Eigen::Index>(cfg.input_dim));
        for (Eigen::Index i = 0; i < p.feature_offset.size(); ++i) {
            p.feature_offset(i) = cfg.offset_scale * r.normal();
        }
        p.gain = r.uniform(1.0 - cfg.gain_spread, 1.0 + cfg.gain_spread);
        p.noise_sigma = cfg.noise_sigma;
        out.push_back(std::move(p));
    }
    return out;
}

World generate_world(const GeneratorConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const Rng root(seed);
    World w;
    w.config = cfg;
    w.seed = seed;
    Rng map_rng = root.derive("true_map");
    w.true_map = make_true_map(cfg, map_rng);
    Rng profile_rng = root.derive("profiles");
    w.subjects = make_profiles(cfg, profile_rng);

    const Rng sample_root = root.derive("samples");
    w.samples.reserve(cfg.n_subjects * cfg.samples_per_subject);
    for (const SubjectProfile& p : w.subjects) {
        Rng r = sample_root.derive(static_cast<std::uint64_t>(p.subject_id));
        for (std::size_t n = 0; n < cfg.samples_per_subject; ++n) {
            Sample s;
            s.subject_id = p.subject_id;
            s.gaze.yaw = r.uniform(cfg.yaw_min, cfg.yaw_max);
            s.gaze.pitch = r.uniform(cfg.pitch_min, cfg.pitch_max);
            const GazeAngles shifted{s.gaze.yaw + p.bias_shift.yaw, s.gaze.pitch + p.bias_shift.pitch};
            s.features = p.gain * w.true_map(shifted) + p.feature_offset;
            for (Eigen::Index i = 0; i < s.features.size(); ++i) {
                s.features(i) += p.noise_sigma * r.normal();
            }
            w.samples.push_back(std::move(s));
        }
    }
    return w;
}

DomainSplit leave_one_subject_out(const std::vector<Sample>& samples, int held_out_id) {
    const auto held_out_count = static_cast<std::size_t>(std::count_if(
        samples.begin(), samples.end(), [&](const Sample& s) { return s.subject_id == held_out_id; }));
    if (held_out_count == 0) {
        throw UnknownSubject("subject " + std::to_string(held_out_id) + " not present in dataset");
    }
    const std::size_t source_count = samples.size() - held_out_count;
    if (source_count == 0) throw InvalidInput("source domain would be empty");
    const auto dim = samples.front().features.size();

    DomainSplit split;
    split.held_out_subject = held_out_id;
    split.source.features.resize(dim, static_cast<Eigen::Index>(source_count));
    split.target.features.resize(dim, static_cast<Eigen::Index>(held_out_count));
    Eigen::Index si = 0, ti = 0;
    for (const Sample& s : samples) {
        if (s.features.size() != dim) throw DimensionMismatch("samples differ in feature dimension");
        if (s.subject_id == held_out_id) {
            split.target.features.col(ti++) = s.features;
            split.target.subject_ids.push_back(s.subject_id);
            split.target_gt.gaze.push_back(s.gaze);
        } else {
            split.source.features.col(si++) = s.features;
            split.source.gaze.push_back(s.gaze);
            split.source.subject_ids.push_back(s.subject_id);
        }
    }
    return split;
}

std::vector<std::size_t> draw_batch_indices(std::size_t n, std::size_t count, Rng& rng) {
    if (n == 0) throw InvalidInput("cannot draw a batch from an empty domain");
    std::vector<std::size_t> out;
    out.reserve(count);
    while (out.size() < count) {
        const std::size_t take = std::min(n, count - out.size());
        const std::vector<std::size_t> part = rng.sample_without_replacement(n, take);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

SourceBatch gather_source(const SourceDomain& source, std::vector<std::size_t> indices) {
    SourceBatch b;
    b.features.resize(source.features.rows(), static_cast<Eigen::Index>(indices.size()));
    b.gaze.reserve(indices.size());
    for (std::size_t j = 0; j < indices.size(); ++j) {
        b.features.col(static_cast<Eigen::Index>(j)) =
            source.features.col(static_cast<Eigen::Index>(indices[j]));
        b.gaze.push_back(source.gaze[indices[j]]);
    }
    b.indices = std::move(indices);
    return b;
}

TargetBatch gather_target(const TargetDomain& target, std::vector<std::size_t> indices) {
    TargetBatch b;
    b.features.resize(target.features.rows(), static_cast<Eigen::Index>(indices.size()));
    for (std::size_t j = 0; j < indices.size(); ++j) {
        b.features.col(static_cast<Eigen::Index>(j)) =
            target.features.col(static_cast<Eigen::Index>(indices[j]));
    }
    b.indices = std::move(indices);
    return b;
}

std::pair<SourceBatch, TargetBatch> sample_batches(const SourceDomain& source,
                                                   const TargetDomain& target, std::size_t source_batch,
                                                   std::size_t target_batch, Rng& rng) {
    if (source.size() == 0 || target.size() == 0) throw InvalidInput("empty domain");
    auto s = gather_source(source, draw_batch_indices(source.size(), source_batch, rng));
    auto t = gather_target(target, draw_batch_indices(target.size(), target_batch, rng));
    return {std::move(s), std::move(t)};
}

void write_dataset_csv(const std::filesystem::path& path, const std::vector<Sample>& samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    const Eigen::Index dim = samples.empty() ? 0 : samples.front().features.size();
    out << "subject_id,yaw,pitch";
    for (Eigen::Index i = 0; i < dim; ++i) out << ",f" << i;
    out << '\n';
    for (const Sample& s : samples) {
        if (s.features.size() != dim) throw DimensionMismatch("samples differ in feature dimension");
        out << s.subject_id << ',' << text::format_double(s.gaze.yaw) << ','
            << text::format_double(s.gaze.pitch);
        for (Eigen::Index i = 0; i < dim; ++i) out << ',' << text::format_double(s.features(i));
        out << '\n';
    }
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<Sample> read_dataset_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw FormatError("dataset '" + path.string() + "' is empty");
    const std::vector<std::string> header = text::split(text::trim(line), ',');
    if (header.size() < 3 || header[0] != "subject_id" || header[1] != "yaw" || header[2] != "pitch") {
        throw FormatError("dataset header must start with subject_id,yaw,pitch");
    }
    const std::size_t dim = header.size() - 3;
    for (std::size_t i = 0; i < dim; ++i) {
        if (header[i + 3] != "f" + std::to_string(i)) {
            throw FormatError("unexpected dataset column '" + header[i + 3] + "'");
        }
    }
    std::vector<Sample> samples;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const std::vector<std::string> cells = text::split(text::trim(line), ',');
        if (cells.size() != header.size()) {
            throw FormatError("dataset line " + std::to_string(line_no) + " has " +
                              std::to_string(cells.size()) + " columns, expected " +
                              std::to_string(header.size()));
        }
        Sample s;
        s.subject_id = static_cast<int>(text::parse_int(cells[0]));
        s.gaze = {text::parse_double(cells[1]), text::parse_double(cells[2])};
        s.features.resize(static_cast<Eigen::Index>(dim));
        for (std::size_t i = 0; i < dim; ++i) {
            s.features(static_cast<Eigen::Index>(i)) = text::parse_double(cells[i + 3]);
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

std::string generator_metadata_json(const GeneratorConfig& cfg, std::uint64_t seed) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["seed"] = seed;
    j["generator"] = {
        {"n_subjects", cfg.n_subjects},
        {"samples_per_subject", cfg.samples_per_subject},
        {"input_dim", cfg.input_dim},
        {"true_map_hidden", cfg.true_map_hidden},
        {"yaw_min", cfg.yaw_min},
        {"yaw_max", cfg.yaw_max},
        {"pitch_min", cfg.pitch_min},
        {"pitch_max", cfg.pitch_max},
        {"bias_shift_max", cfg.bias_shift_max},
        {"bias_shift_sigma", cfg.bias_shift_sigma},
        {"bias_shift_uniform", cfg.bias_shift_uniform},
        {"offset_scale", cfg.offset_scale},
        {"gain_spread", cfg.gain_spread},
        {"noise_sigma", cfg.noise_sigma},
        {"identical_subjects", cfg.identical_subjects},
    };
    return j.dump(2) + "\n";
}

void write_generator_metadata(const std::filesystem::path& path, const GeneratorConfig& cfg,
                              std::uint64_t seed) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << generator_metadata_json(cfg, seed);
}

}  // namespace epcgaze
