#pragma once

// Binary model files. Layout (little endian):
//   "BPMODEL\0" u32 version
//   string  JSON header {kind, mode, n_bands, n_outputs, components}
//   payload (kind specific, raw f64)
// Numbers never pass through text, so a save/load/save cycle is byte-stable.

#include <filesystem>
#include <fstream>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "biopar/gpr.hpp"
#include "biopar/io.hpp"
#include "biopar/krr.hpp"
#include "biopar/nn.hpp"

namespace biopar {

using AnyModel = std::variant<GprModel, KrrModel, NnModel>;

inline constexpr char kModelMagic[8] = {'B', 'P', 'M', 'O', 'D', 'E', 'L', '\0'};
inline constexpr std::uint32_t kModelVersion = 1;

inline const char* model_kind(const AnyModel& m) {
    switch (m.index()) {
        case 0: return "gpr";
        case 1: return "krr";
        default: return "nn";
    }
}

inline OutputMode model_mode(const AnyModel& m) {
    return std::visit([](const auto& x) { return x.mode; }, m);
}

inline Eigen::Index model_bands(const AnyModel& m) {
    return std::visit([](const auto& x) { return x.n_bands(); }, m);
}

/// Mean prediction for any model kind.
inline Matrix predict_mean(const AnyModel& m, const Matrix& xs) {
    if (const auto* g = std::get_if<GprModel>(&m)) return predict_gpr_mean(*g, xs);
    if (const auto* k = std::get_if<KrrModel>(&m)) return predict_krr(*k, xs);
    return predict_nn(std::get<NnModel>(m), xs);
}

namespace detail {

inline void write_vector(std::ostream& out, const Vector& v) { io::write_matrix(out, v); }
inline Vector read_vector(std::istream& in) {
    const Matrix m = io::read_matrix(in);
    if (m.cols() != 1 && m.size() != 0) throw DataError("model file: expected a column vector");
    return m;
}

inline void write_ints(std::ostream& out, const std::vector<int>& v) {
    io::write_u32(out, static_cast<std::uint32_t>(v.size()));
    for (int i : v) io::write_u32(out, static_cast<std::uint32_t>(i));
}

inline std::vector<int> read_ints(std::istream& in, int max_value) {
    const auto n = io::read_u32(in);
    if (n > 64) throw DataError("model file: output list too long");
    std::vector<int> v(n);
    for (auto& i : v) {
        i = static_cast<int>(io::read_u32(in));
        if (i < 0 || i >= max_value) throw DataError("model file: output index out of range");
    }
    return v;
}

inline void write_std(std::ostream& out, const Standardizer& s) {
    write_vector(out, s.mean);
    write_vector(out, s.scale);
}

inline Standardizer read_std(std::istream& in) {
    Standardizer s;
    s.mean = read_vector(in);
    s.scale = read_vector(in);
    if (s.mean.size() != s.scale.size()) throw DataError("model file: standardizer size mismatch");
    return s;
}

inline void write_payload(std::ostream& out, const GprModel& m) {
    io::write_matrix(out, m.x_train);
    io::write_f64(out, m.final_cost);
    for (const auto& c : m.components) {
        write_ints(out, c.outputs);
        io::write_f64(out, c.hyper.nu);
        io::write_f64(out, c.hyper.sigma_n);
        write_vector(out, Eigen::Map<const Vector>(c.hyper.lengthscales.data(), static_cast<Eigen::Index>(c.hyper.lengthscales.size())));
        io::write_matrix(out, c.alpha);
        io::write_lower(out, c.chol.lower);
        io::write_f64(out, c.chol.jitter);
        write_vector(out, c.log_likelihood);
    }
}

inline void read_payload(std::istream& in, GprModel& m, std::size_t n_comp) {
    m.x_train = io::read_matrix(in);
    m.final_cost = io::read_f64(in);
    for (std::size_t i = 0; i < n_comp; ++i) {
        GprComponent c;
        c.outputs = read_ints(in, static_cast<int>(m.n_outputs()));
        c.hyper.nu = io::read_f64(in);
        c.hyper.sigma_n = io::read_f64(in);
        const Vector l = read_vector(in);
        c.hyper.lengthscales.assign(l.data(), l.data() + l.size());
        c.alpha = io::read_matrix(in);
        c.chol.lower = io::read_lower(in);
        c.chol.jitter = io::read_f64(in);
        c.log_likelihood = read_vector(in);
        c.hyper.validate();
        if (c.alpha.rows() != m.x_train.rows() || c.chol.lower.rows() != m.x_train.rows())
            throw DataError("model file: GPR component sizes do not match the training set");
        m.components.push_back(std::move(c));
    }
}

inline void write_payload(std::ostream& out, const KrrModel& m) {
    io::write_matrix(out, m.x_train);
    io::write_f64(out, m.mean_distance);
    for (const auto& c : m.components) {
        write_ints(out, c.outputs);
        io::write_f64(out, c.lengthscale);
        io::write_f64(out, c.lambda);
        io::write_matrix(out, c.alpha);
        io::write_u64(out, c.cv.size());
        for (const auto& s : c.cv) {
            io::write_f64(out, s.lambda);
            io::write_f64(out, s.lengthscale);
            io::write_f64(out, s.rmse);
        }
    }
}

inline void read_payload(std::istream& in, KrrModel& m, std::size_t n_comp) {
    m.x_train = io::read_matrix(in);
    m.mean_distance = io::read_f64(in);
    for (std::size_t i = 0; i < n_comp; ++i) {
        KrrComponent c;
        c.outputs = read_ints(in, static_cast<int>(m.n_outputs()));
        c.lengthscale = io::read_f64(in);
        c.lambda = io::read_f64(in);
        c.alpha = io::read_matrix(in);
        const auto n_cv = io::read_u64(in);
        if (n_cv > 100000) throw DataError("model file: CV table too long");
        for (std::uint64_t k = 0; k < n_cv; ++k) {
            CvScore s{};
            s.lambda = io::read_f64(in);
            s.lengthscale = io::read_f64(in);
            s.rmse = io::read_f64(in);
            c.cv.push_back(s);
        }
        if (c.alpha.rows() != m.x_train.rows()) throw DataError("model file: KRR weights do not match the training set");
        m.components.push_back(std::move(c));
    }
}

inline void write_payload(std::ostream& out, const NnModel& m) {
    io::write_u64(out, m.seed);
    for (const auto& c : m.components) {
        write_ints(out, c.outputs);
        io::write_f64(out, c.learning_rate);
        io::write_u32(out, static_cast<std::uint32_t>(c.init));
        io::write_u32(out, static_cast<std::uint32_t>(c.epochs_run));
        io::write_f64(out, c.validation_rmse);
        io::write_matrix(out, c.net.w1);
        write_vector(out, c.net.b1);
        io::write_matrix(out, c.net.w2);
        write_vector(out, c.net.b2);
    }
}

inline void read_payload(std::istream& in, NnModel& m, std::size_t n_comp) {
    m.seed = io::read_u64(in);
    for (std::size_t i = 0; i < n_comp; ++i) {
        NnComponent c;
        c.outputs = read_ints(in, static_cast<int>(m.n_outputs()));
        c.learning_rate = io::read_f64(in);
        c.init = static_cast<int>(io::read_u32(in));
        c.epochs_run = static_cast<int>(io::read_u32(in));
        c.validation_rmse = io::read_f64(in);
        c.net.w1 = io::read_matrix(in);
        c.net.b1 = read_vector(in);
        c.net.w2 = io::read_matrix(in);
        c.net.b2 = read_vector(in);
        if (c.net.w1.rows() != c.net.b1.size() || c.net.w2.cols() != c.net.w1.rows() || c.net.w2.rows() != c.net.b2.size())
            throw DataError("model file: inconsistent network shapes");
        m.components.push_back(std::move(c));
    }
}

}  // namespace detail

inline void save_model(const AnyModel& model, std::ostream& out) {
    io::write_magic(out, kModelMagic, kModelVersion);
    std::visit(
        [&](const auto& m) {
            const nlohmann::json header{{"kind", model_kind(model)},
                                        {"mode", to_string(m.mode)},
                                        {"n_bands", m.n_bands()},
                                        {"n_outputs", m.n_outputs()},
                                        {"components", m.components.size()}};
            io::write_string(out, header.dump());
            detail::write_std(out, m.input_stats);
            detail::write_std(out, m.output_stats);
            detail::write_payload(out, m);
        },
        model);
}

inline void save_model(const AnyModel& model, const std::filesystem::path& path) {
    auto out = io::open_out(path, true);
    save_model(model, out);
    if (!out) throw DataError("failed writing " + path.string());
}

inline AnyModel load_model(std::istream& in, const std::string& what = "model") {
    const auto version = io::read_magic(in, kModelMagic, what);
    if (version != kModelVersion) throw DataError(what + ": unsupported model format version " + std::to_string(version));
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(io::read_string(in, 1 << 20));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(what + ": malformed header: " + e.what());
    }
    const std::string kind = header.value("kind", "");
    const auto n_comp = header.value("components", std::size_t{0});
    if (n_comp == 0 || n_comp > 64) throw DataError(what + ": bad component count");
    auto fill = [&](auto m) -> AnyModel {
        m.mode = output_mode_from_string(header.value("mode", ""));
        m.input_stats = detail::read_std(in);
        m.output_stats = detail::read_std(in);
        detail::read_payload(in, m, n_comp);
        return m;
    };
    if (kind == "gpr") return fill(GprModel{});
    if (kind == "krr") return fill(KrrModel{});
    if (kind == "nn") return fill(NnModel{});
    throw DataError(what + ": unknown model kind '" + kind + "'");
}

inline AnyModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file " + path.string());
    return load_model(in, path.string());
}

}  // namespace biopar
