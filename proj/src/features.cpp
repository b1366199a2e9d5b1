#include "fiml/features.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace fiml {

namespace {

using Mat3 = std::array<double, 9>;

Mat3 matmul(const Mat3& a, const Mat3& b) {
    Mat3 c{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int l = 0; l < 3; ++l) s += a[3 * i + l] * b[3 * l + j];
            c[3 * i + j] = s;
        }
    return c;
}

double trace(const Mat3& a) { return a[0] + a[4] + a[8]; }

double frobenius(const Mat3& a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

Mat3 scaled(const Mat3& a, double f) {
    Mat3 c = a;
    for (double& v : c) v *= f;
    return c;
}

/// Antisymmetric tensor dual to a vector: A = -I x v, A_ij = -eps_ijk v_k.
Mat3 antisym_from_vector(double vx, double vy, double vz) {
    Mat3 a{};
    a[1] = -vz;  a[2] = vy;
    a[3] = vz;   a[5] = -vx;
    a[6] = -vy;  a[7] = vx;
    return a;
}

// Minimal integrity basis of one symmetric (S) and three antisymmetric
// (W, Ap, Ak) tensors: 47 trace expressions.
const std::array<std::string, kNumInvariantFeatures> kInvariantExprs = {{
    "S S",
    "S S S",
    "W W",
    "Ap Ap",
    "Ak Ak",
    "W W S",
    "W W S S",
    "W W S W S S",
    "Ap Ap S",
    "Ap Ap S S",
    "Ap Ap S Ap S S",
    "Ak Ak S",
    "Ak Ak S S",
    "Ak Ak S Ak S S",
    "W Ap",
    "Ap Ak",
    "W Ak",
    "W Ap S",
    "W Ap S S",
    "W W Ap S",
    "W W Ap S S",
    "W W S Ap S S",
    "Ap Ap W S",
    "Ap Ap W S S",
    "Ap Ap S W S S",
    "W Ak S",
    "W Ak S S",
    "W W Ak S",
    "W W Ak S S",
    "W W S Ak S S",
    "Ak Ak W S",
    "Ak Ak W S S",
    "Ak Ak S W S S",
    "Ap Ak S",
    "Ap Ak S S",
    "Ap Ap Ak S",
    "Ap Ap Ak S S",
    "Ap Ap S Ak S S",
    "Ak Ak Ap S",
    "Ak Ak Ap S S",
    "Ak Ak S Ap S S",
    "W Ap Ak",
    "W Ap Ak S",
    "W Ak Ap S",
    "W Ap Ak S S",
    "W Ak Ap S S",
    "W Ap S Ak S S",
}};

struct ParsedExpr {
    std::vector<int> tensors;  // 0=S, 1=W, 2=Ap, 3=Ak
    unsigned deps = 0;
};

const std::vector<ParsedExpr>& parsed_exprs() {
    static const std::vector<ParsedExpr> parsed = [] {
        std::vector<ParsedExpr> out;
        out.reserve(kNumInvariantFeatures);
        for (const std::string& expr : kInvariantExprs) {
            ParsedExpr p;
            std::istringstream iss(expr);
            std::string tok;
            while (iss >> tok) {
                int id;
                if (tok == "S") id = 0;
                else if (tok == "W") id = 1;
                else if (tok == "Ap") id = 2;
                else if (tok == "Ak") id = 3;
                else throw std::logic_error("bad invariant token: " + tok);
                p.tensors.push_back(id);
                p.deps |= 1u << id;
            }
            out.push_back(std::move(p));
        }
        return out;
    }();
    return parsed;
}

double safe_ratio(double num, double den) { return (den > 0.0) ? num / den : 0.0; }

}  // namespace

const std::array<std::string, kNumInvariantFeatures>& invariant_expressions() {
    return kInvariantExprs;
}

unsigned invariant_dependencies(int invariant_index) {
    return parsed_exprs().at(invariant_index).deps;
}

const std::array<std::string, kNumFeatures>& feature_names() {
    static const std::array<std::string, kNumFeatures> names = [] {
        std::array<std::string, kNumFeatures> out;
        out[0] = "pgrad_alignment";
        out[1] = "timescale_ratio";
        out[2] = "q_criterion";
        out[3] = "turb_intensity";
        out[4] = "nut_ratio";
        for (int i = 0; i < kNumInvariantFeatures; ++i) {
            std::string expr = kInvariantExprs[i];
            for (char& ch : expr)
                if (ch == ' ') ch = '_';
            char buf[8];
            std::snprintf(buf, sizeof(buf), "%02d", i + 1);
            out[kNumEngineeredFeatures + i] = std::string("inv") + buf + "_tr_" + expr;
        }
        return out;
    }();
    return names;
}

std::array<double, kNumEngineeredFeatures> engineered_features_cell(
    double ux, double uy, double dpdx, double dpdy, double strain_frob,
    double rotation_frob, double k, double omega, double nu_t, double nu) {
    std::array<double, kNumEngineeredFeatures> f{};

    // Streamline pressure gradient: (2/pi) acos(grad p . u / (|grad p||u|)) - 1.
    // Vanishing |grad p||u| takes the neutral value 0 (orthogonal convention).
    const double dot = dpdx * ux + dpdy * uy;
    const double den = std::sqrt((dpdx * dpdx + dpdy * dpdy) * (ux * ux + uy * uy));
    if (den > 0.0) {
        double c = dot / den;
        c = std::min(1.0, std::max(-1.0, c));
        f[0] = 2.0 / M_PI * std::acos(c) - 1.0;
    } else {
        f[0] = 0.0;
    }

    // Turbulence time scale ratio (omega > 0 keeps the denominator positive).
    f[1] = 2.0 * (std::pow(strain_frob / (strain_frob + omega), 0.25) - 0.5);

    // Q-criterion; S = W = 0 takes the neutral value 0.
    const double s2 = strain_frob * strain_frob;
    const double w2 = rotation_frob * rotation_frob;
    f[2] = (s2 + w2 > 0.0) ? (s2 - w2) / (s2 + w2) : 0.0;

    // Turbulence intensity.
    const double umag2 = ux * ux + uy * uy;
    f[3] = 2.0 * (std::pow(safe_ratio(k, 0.5 * umag2 + k), 0.25) - 0.5);

    // Turbulent viscosity ratio.
    f[4] = 2.0 * (nu_t / (100.0 * nu + nu_t) - 0.5);

    return f;
}

std::vector<TensorSet> tensor_sets(const FlowState& state, const Mesh& mesh) {
    const int n = mesh.n_cells();
    std::vector<double> dudx, dudy, dvdx, dvdy, dpdx, dpdy, dkdx, dkdy;
    gradient(mesh, state.u, dudx, dudy);
    if (mesh.dim == 2 && !state.v.empty()) {
        gradient(mesh, state.v, dvdx, dvdy);
    } else {
        dvdx.assign(n, 0.0);
        dvdy.assign(n, 0.0);
    }
    if (!state.p.empty()) {
        gradient(mesh, state.p, dpdx, dpdy);
    } else {
        dpdx.assign(n, 0.0);
        dpdy.assign(n, 0.0);
    }
    gradient(mesh, state.k, dkdx, dkdy);

    std::vector<TensorSet> out(n);
    for (int c = 0; c < n; ++c) {
        TensorSet& t = out[c];
        const double gxx = dudx[c], gxy = dudy[c];
        const double gyx = dvdx[c], gyy = dvdy[c];
        t.S = {gxx, 0.5 * (gxy + gyx), 0.0,
               0.5 * (gxy + gyx), gyy, 0.0,
               0.0, 0.0, 0.0};
        t.W = {0.0, 0.5 * (gxy - gyx), 0.0,
               0.5 * (gyx - gxy), 0.0, 0.0,
               0.0, 0.0, 0.0};
        t.Ap = antisym_from_vector(dpdx[c], dpdy[c], 0.0);
        t.Ak = antisym_from_vector(dkdx[c], dkdy[c], 0.0);
        t.omega = std::max(state.omega.empty() ? 1.0 : state.omega[c], 1e-300);

        const double ux = state.u[c];
        const double uy = state.v.empty() ? 0.0 : state.v[c];
        const double ax = ux * gxx + uy * gxy;
        const double ay = ux * gyx + uy * gyy;
        t.conv_accel_norm = std::hypot(ax, ay);
        const double k = state.k.empty() ? 0.0 : std::max(state.k[c], 0.0);
        t.k_scale = t.omega * std::sqrt(k);
    }
    return out;
}

std::array<double, kNumInvariantFeatures> invariant_features_cell(
    const TensorSet& tensors, const FeatureOptions& opts) {
    // Normalize each tensor by its own norm plus a physical scale; the scale
    // keeps denominators positive wherever the tensor itself is nonzero.
    const double ns = frobenius(tensors.S) + tensors.omega;
    const double nw = frobenius(tensors.W) + tensors.omega;
    const double nap = frobenius(tensors.Ap) + tensors.conv_accel_norm;
    const double nak = frobenius(tensors.Ak) + tensors.k_scale;

    const Mat3 hats[4] = {
        scaled(tensors.S, ns > 0.0 ? 1.0 / ns : 0.0),
        scaled(tensors.W, nw > 0.0 ? 1.0 / nw : 0.0),
        scaled(tensors.Ap, nap > 0.0 ? 1.0 / nap : 0.0),
        scaled(tensors.Ak, nak > 0.0 ? 1.0 / nak : 0.0),
    };

    std::array<double, kNumInvariantFeatures> out{};
    const auto& exprs = parsed_exprs();
    for (int i = 0; i < kNumInvariantFeatures; ++i) {
        const auto& toks = exprs[i].tensors;
        Mat3 prod = hats[toks[0]];
        for (std::size_t t = 1; t < toks.size(); ++t)
            prod = matmul(prod, hats[toks[t]]);
        double v = trace(prod);
        if (opts.squash_invariants) v = v / (std::abs(v) + 1.0);
        out[i] = v;
    }
    return out;
}

std::vector<std::array<double, kNumEngineeredFeatures>> engineered_features(
    const FlowState& state, const Mesh& mesh) {
    const int n = mesh.n_cells();
    std::vector<double> dudx, dudy, dvdx, dvdy, dpdx, dpdy;
    gradient(mesh, state.u, dudx, dudy);
    if (mesh.dim == 2 && !state.v.empty()) {
        gradient(mesh, state.v, dvdx, dvdy);
    } else {
        dvdx.assign(n, 0.0);
        dvdy.assign(n, 0.0);
    }
    if (!state.p.empty()) {
        gradient(mesh, state.p, dpdx, dpdy);
    } else {
        dpdx.assign(n, 0.0);
        dpdy.assign(n, 0.0);
    }

    std::vector<std::array<double, kNumEngineeredFeatures>> out(n);
    for (int c = 0; c < n; ++c) {
        if (!mesh.is_active(c)) {
            out[c].fill(0.0);  // blanked cells carry neutral rows
            continue;
        }
        const double sxx = dudx[c];
        const double syy = dvdy[c];
        const double sxy = 0.5 * (dudy[c] + dvdx[c]);
        const double wxy = 0.5 * (dudy[c] - dvdx[c]);
        const double strain_frob = std::sqrt(sxx * sxx + syy * syy + 2.0 * sxy * sxy);
        const double rotation_frob = std::sqrt(2.0 * wxy * wxy);
        out[c] = engineered_features_cell(
            state.u[c], state.v.empty() ? 0.0 : state.v[c], dpdx[c], dpdy[c],
            strain_frob, rotation_frob, state.k.empty() ? 0.0 : state.k[c],
            state.omega.empty() ? 1.0 : state.omega[c],
            state.nu_t.empty() ? 0.0 : state.nu_t[c], state.nu);
    }
    return out;
}

std::vector<std::array<double, kNumInvariantFeatures>> invariant_features(
    const FlowState& state, const Mesh& mesh, const FeatureOptions& opts) {
    const std::vector<TensorSet> sets = tensor_sets(state, mesh);
    std::vector<std::array<double, kNumInvariantFeatures>> out(sets.size());
    for (std::size_t c = 0; c < sets.size(); ++c) {
        if (!mesh.is_active(static_cast<int>(c))) {
            out[c].fill(0.0);  // blanked cells carry neutral rows
            continue;
        }
        out[c] = invariant_features_cell(sets[c], opts);
    }
    return out;
}

std::vector<std::array<double, kNumFeatures>> compute_features(
    const FlowState& state, const Mesh& mesh, const FeatureOptions& opts) {
    const auto eng = engineered_features(state, mesh);
    const auto inv = invariant_features(state, mesh, opts);
    std::vector<std::array<double, kNumFeatures>> out(eng.size());
    for (std::size_t c = 0; c < eng.size(); ++c) {
        for (int i = 0; i < kNumEngineeredFeatures; ++i) out[c][i] = eng[c][i];
        for (int i = 0; i < kNumInvariantFeatures; ++i)
            out[c][kNumEngineeredFeatures + i] = inv[c][i];
        for (double v : out[c])
            if (!std::isfinite(v))
                throw std::runtime_error("compute_features: non-finite feature value");
    }
    return out;
}

TrainingSet assemble_training_set(const std::vector<TrainingCase>& cases,
                                  double band_low, double band_high) {
    if (!(band_low <= band_high))
        throw std::invalid_argument("assemble_training_set: invalid band");
    TrainingSet out;
    out.band_low = band_low;
    out.band_high = band_high;
    for (const TrainingCase& cs : cases) {
        if (cs.features.size() != cs.beta.size())
            throw std::invalid_argument("assemble_training_set: size mismatch in " +
                                        cs.source);
        TrainingSource src;
        src.name = cs.source;
        for (std::size_t i = 0; i < cs.beta.size(); ++i) {
            if (!cs.usable.empty() && !cs.usable[i]) continue;
            const double b = cs.beta[i];
            if (b >= band_low && b <= band_high) continue;  // excluded band
            src.features.push_back(cs.features[i]);
            src.targets.push_back(b);
        }
        if (src.targets.empty()) {
            out.dropped_sources.push_back(cs.source);
        } else {
            out.sources.push_back(std::move(src));
        }
    }
    return out;
}

}  // namespace fiml
