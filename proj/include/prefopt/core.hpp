#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace prefopt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using json = nlohmann::json;

// Dense feature table psi(s, a) in R^d over integer state/action ids.
// Every feature vector must satisfy ||psi|| <= 1; construction rejects
// violations instead of rescaling, so downstream norm bounds hold as stated.
class FeatureMap {
public:
    FeatureMap(int num_states, int num_actions, std::vector<Vec> table)
        : num_states_(num_states), num_actions_(num_actions), table_(std::move(table)) {
        if (num_states_ <= 0 || num_actions_ <= 0) {
            throw std::invalid_argument("FeatureMap: state/action counts must be positive");
        }
        if (table_.size() != static_cast<std::size_t>(num_states_) * num_actions_) {
            throw std::invalid_argument("FeatureMap: table must cover every (state, action) pair");
        }
        dim_ = static_cast<int>(table_.front().size());
        if (dim_ <= 0) throw std::invalid_argument("FeatureMap: feature dimension must be positive");
        for (const Vec& v : table_) {
            if (v.size() != dim_) {
                throw std::invalid_argument("FeatureMap: inconsistent feature dimensions");
            }
            if (!(v.norm() <= 1.0)) {
                throw std::invalid_argument("FeatureMap: feature norm exceeds 1");
            }
        }
    }

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    int dim() const { return dim_; }

    const Vec& psi(int state, int action) const {
        if (state < 0 || state >= num_states_) {
            throw std::out_of_range("FeatureMap: state id out of range");
        }
        if (action < 0 || action >= num_actions_) {
            throw std::out_of_range("FeatureMap: action id out of range");
        }
        return table_[static_cast<std::size_t>(state) * num_actions_ + action];
    }

private:
    int num_states_;
    int num_actions_;
    int dim_;
    std::vector<Vec> table_;
};

// Policy parameter vector with its norm bound B.  The bound is maintained by
// projection (see policy.hpp), not checked here, so intermediate optimizer
// states can be represented.
struct PolicyParams {
    Vec theta;
    double bound;
};

// One comparison record z = (s, a1, a2, y); y = 1 means a1 was preferred.
struct PreferenceSample {
    PreferenceSample(int state_, int first_, int second_, int label_)
        : state(state_), first(first_), second(second_), label(label_) {
        if (first == second) {
            throw std::invalid_argument("PreferenceSample: the two actions must differ");
        }
        if (label != 0 && label != 1) {
            throw std::invalid_argument("PreferenceSample: label must be 0 or 1");
        }
    }

    int state;
    int first;
    int second;
    int label;
};

// Swaps the two actions and flips the label; the represented preference is
// unchanged.
inline PreferenceSample swap_actions(const PreferenceSample& z) {
    return PreferenceSample(z.state, z.second, z.first, 1 - z.label);
}

struct DatasetMeta {
    std::uint64_t seed = 0;
    std::string reward;
    double alpha_o = 0.0;
    std::size_t n = 0;
};

class PreferenceDataset {
public:
    PreferenceDataset(std::vector<PreferenceSample> samples, DatasetMeta meta)
        : samples_(std::move(samples)), meta_(std::move(meta)) {
        if (meta_.n != samples_.size()) {
            throw std::invalid_argument("PreferenceDataset: meta sample count mismatch");
        }
    }

    const std::vector<PreferenceSample>& samples() const { return samples_; }
    const DatasetMeta& meta() const { return meta_; }
    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }
    const PreferenceSample& operator[](std::size_t i) const { return samples_[i]; }

private:
    std::vector<PreferenceSample> samples_;
    DatasetMeta meta_;
};

// x = psi(s, a1) - psi(s, a2).  ||x|| <= 2 follows from the feature bound.
inline Vec feature_difference(const PreferenceSample& z, const FeatureMap& fm) {
    return fm.psi(z.state, z.first) - fm.psi(z.state, z.second);
}

// Sigma_D = (1/n) sum_i x_i x_i^T, accumulated left to right.
inline Mat empirical_covariance(const PreferenceDataset& ds, const FeatureMap& fm) {
    if (ds.empty()) throw std::domain_error("empirical_covariance: empty dataset");
    Mat sigma = Mat::Zero(fm.dim(), fm.dim());
    for (const PreferenceSample& z : ds.samples()) {
        const Vec x = feature_difference(z, fm);
        sigma.noalias() += x * x.transpose();
    }
    return sigma / static_cast<double>(ds.size());
}

// Smallest eigenvalue of a symmetric matrix (dense self-adjoint solve).
// Symmetry is checked elementwise to 1e-12.
inline double min_eigenvalue(const Mat& m) {
    if (m.rows() != m.cols()) throw std::domain_error("min_eigenvalue: matrix not square");
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
            if (std::abs(m(i, j) - m(j, i)) > 1e-12) {
                throw std::domain_error("min_eigenvalue: matrix not symmetric");
            }
        }
    }
    Eigen::SelfAdjointEigenSolver<Mat> solver(m, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("min_eigenvalue: eigensolver failed to converge");
    }
    return solver.eigenvalues().minCoeff();
}

// ------------------------------------------------------------------
// Serialization.
//
// Feature maps are JSON objects {"d", "num_states", "num_actions", "table"}
// with the table flattened row-major over (state, action, component).
// Datasets are line-oriented: the first line is a JSON metadata header
// {"alpha_o", "n", "reward", "seed"}, each following line is
// "s a1 a2 y" as space-separated integers.  Load followed by save
// reproduces the original bytes.
// ------------------------------------------------------------------

inline json feature_map_to_json(const FeatureMap& fm) {
    json table = json::array();
    for (int s = 0; s < fm.num_states(); ++s) {
        for (int a = 0; a < fm.num_actions(); ++a) {
            const Vec& v = fm.psi(s, a);
            for (int k = 0; k < fm.dim(); ++k) table.push_back(v(k));
        }
    }
    return json{{"d", fm.dim()},
                {"num_states", fm.num_states()},
                {"num_actions", fm.num_actions()},
                {"table", std::move(table)}};
}

inline FeatureMap feature_map_from_json(const json& j) {
    const int d = j.at("d").get<int>();
    const int num_states = j.at("num_states").get<int>();
    const int num_actions = j.at("num_actions").get<int>();
    const auto& table = j.at("table");
    if (d <= 0 || num_states <= 0 || num_actions <= 0) {
        throw std::invalid_argument("feature_map_from_json: counts must be positive");
    }
    if (table.size() != static_cast<std::size_t>(num_states) * num_actions * d) {
        throw std::invalid_argument("feature_map_from_json: table length mismatch");
    }
    std::vector<Vec> rows;
    rows.reserve(static_cast<std::size_t>(num_states) * num_actions);
    std::size_t idx = 0;
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) {
            Vec v(d);
            for (int k = 0; k < d; ++k) v(k) = table.at(idx++).get<double>();
            rows.push_back(std::move(v));
        }
    }
    return FeatureMap(num_states, num_actions, std::move(rows));
}

inline std::string dataset_to_string(const PreferenceDataset& ds) {
    json header{{"alpha_o", ds.meta().alpha_o},
                {"n", ds.meta().n},
                {"reward", ds.meta().reward},
                {"seed", ds.meta().seed}};
    std::string out = header.dump();
    out.push_back('\n');
    for (const PreferenceSample& z : ds.samples()) {
        out += std::to_string(z.state);
        out.push_back(' ');
        out += std::to_string(z.first);
        out.push_back(' ');
        out += std::to_string(z.second);
        out.push_back(' ');
        out += std::to_string(z.label);
        out.push_back('\n');
    }
    return out;
}

inline PreferenceDataset dataset_from_string(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) {
        throw std::invalid_argument("dataset_from_string: missing metadata header");
    }
    const json header = json::parse(line);
    DatasetMeta meta;
    meta.alpha_o = header.at("alpha_o").get<double>();
    meta.n = header.at("n").get<std::size_t>();
    meta.reward = header.at("reward").get<std::string>();
    meta.seed = header.at("seed").get<std::uint64_t>();
    std::vector<PreferenceSample> samples;
    samples.reserve(meta.n);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        int s, a1, a2, y;
        if (!(ls >> s >> a1 >> a2 >> y)) {
            throw std::invalid_argument("dataset_from_string: malformed sample line: " + line);
        }
        samples.emplace_back(s, a1, a2, y);
    }
    return PreferenceDataset(std::move(samples), std::move(meta));
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void save_dataset(const PreferenceDataset& ds, const std::string& path) {
    write_text_file(path, dataset_to_string(ds));
}

inline PreferenceDataset load_dataset(const std::string& path) {
    return dataset_from_string(read_text_file(path));
}

} // namespace prefopt
