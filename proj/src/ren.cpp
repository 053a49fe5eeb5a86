#include "yoularen/ren.hpp"

#include <cmath>
#include <random>

#include "yoularen/random.hpp"

namespace yoularen::ren {

void RenDims::validate() const {
    if (n_chi < 0 || n_v < 0) throw std::invalid_argument("RenDims: n_chi and n_v must be >= 0");
    if (n_in < 1 || n_out < 1) throw std::invalid_argument("RenDims: n_in and n_out must be >= 1");
}

long RenDims::num_params() const {
    const long blocks = n_chi * n_chi + n_chi * n_v + n_chi * n_in + n_v * n_chi + n_v * n_v +
                        n_v * n_in + n_out * n_chi + n_out * n_v + n_out * n_in;
    return blocks + n_chi + n_v + n_out;
}

RenTheta RenTheta::zeros(const RenDims& d, double alpha_bar, double out_scale) {
    d.validate();
    RenTheta t;
    t.dims = d;
    t.A_free = Matrix::Zero(d.n_chi, d.n_chi);
    t.B1_free = Matrix::Zero(d.n_chi, d.n_v);
    t.B2 = Matrix::Zero(d.n_chi, d.n_in);
    t.C1_free = Matrix::Zero(d.n_v, d.n_chi);
    t.D11_free = Matrix::Zero(d.n_v, d.n_v);
    t.D12 = Matrix::Zero(d.n_v, d.n_in);
    t.C2 = Matrix::Zero(d.n_out, d.n_chi);
    t.D21 = Matrix::Zero(d.n_out, d.n_v);
    t.D22 = Matrix::Zero(d.n_out, d.n_in);
    t.b_chi = Vector::Zero(d.n_chi);
    t.b_v = Vector::Zero(d.n_v);
    t.b_y = Vector::Zero(d.n_out);
    t.alpha_bar = alpha_bar;
    t.out_scale = out_scale;
    return t;
}

RenTheta RenTheta::random(const RenDims& d, std::uint64_t seed, double alpha_bar,
                          double output_gain, double out_scale) {
    if (!(out_scale > 0.0)) throw std::invalid_argument("RenTheta::random: out_scale must be > 0");
    RenTheta t = zeros(d, alpha_bar, out_scale);
    Rng rng(derive_seed(seed, {kInitStream}));
    for (Matrix* m : {&t.A_free, &t.B1_free, &t.B2, &t.C1_free, &t.D11_free, &t.D12, &t.C2,
                      &t.D21, &t.D22})
        *m = standard_normal(rng, m->rows(), m->cols());
    // N_c is close to c M for small M, so this starts the output blocks near gain * N(0, 1).
    for (Matrix* m : {&t.C2, &t.D21, &t.D22}) *m *= output_gain / out_scale;
    return t;
}

namespace {

template <class Theta, class Visit>
void for_each_block(Theta& t, Visit&& visit) {
    visit(t.A_free);
    visit(t.B1_free);
    visit(t.B2);
    visit(t.C1_free);
    visit(t.D11_free);
    visit(t.D12);
    visit(t.C2);
    visit(t.D21);
    visit(t.D22);
}

}  // namespace

Vector RenTheta::to_flat() const {
    Vector flat(dims.num_params());
    long k = 0;
    auto put = [&](const Matrix& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) flat(k++) = m(i, j);
    };
    for_each_block(*this, put);
    for (const Vector* b : {&b_chi, &b_v, &b_y}) {
        flat.segment(k, b->size()) = *b;
        k += b->size();
    }
    return flat;
}

RenTheta RenTheta::from_flat(const Eigen::Ref<const Vector>& flat, const RenDims& d,
                             double alpha_bar, double out_scale) {
    if (flat.size() != d.num_params())
        throw std::invalid_argument("RenTheta::from_flat: expected " +
                                    std::to_string(d.num_params()) + " entries, got " +
                                    std::to_string(flat.size()));
    RenTheta t = zeros(d, alpha_bar, out_scale);
    long k = 0;
    for_each_block(t, [&](Matrix& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = flat(k++);
    });
    for (Vector* b : {&t.b_chi, &t.b_v, &t.b_y}) {
        *b = flat.segment(k, b->size());
        k += b->size();
    }
    return t;
}

RenWeights RenWeights::zeros(const RenDims& d, double alpha_bar) {
    RenWeights w;
    w.dims = d;
    w.A = Matrix::Zero(d.n_chi, d.n_chi);
    w.B1 = Matrix::Zero(d.n_chi, d.n_v);
    w.B2 = Matrix::Zero(d.n_chi, d.n_in);
    w.C1 = Matrix::Zero(d.n_v, d.n_chi);
    w.D11 = Matrix::Zero(d.n_v, d.n_v);
    w.D12 = Matrix::Zero(d.n_v, d.n_in);
    w.C2 = Matrix::Zero(d.n_out, d.n_chi);
    w.D21 = Matrix::Zero(d.n_out, d.n_v);
    w.D22 = Matrix::Zero(d.n_out, d.n_in);
    w.b_chi = Vector::Zero(d.n_chi);
    w.b_v = Vector::Zero(d.n_v);
    w.b_y = Vector::Zero(d.n_out);
    w.alpha_bar = alpha_bar;
    return w;
}

Matrix smooth_normalize(const Matrix& m, double budget) {
    return (budget / (1.0 + m.norm())) * m;
}

Matrix smooth_normalize_vjp(const Matrix& m, double budget, const Matrix& upstream) {
    const double f = m.norm();
    Matrix g = (budget / (1.0 + f)) * upstream;
    // The radial term vanishes at M = 0 (it is O(|M|)), so skip it there instead of dividing by 0.
    if (f > 0.0) g -= (budget * upstream.cwiseProduct(m).sum() / ((1.0 + f) * (1.0 + f) * f)) * m;
    return g;
}

Budgets Budgets::for_alpha(double alpha_bar) {
    // |A| < a and 2 |B1| |C1| < 2 bc^2 = alpha_bar / 2, so the sum stays below alpha_bar.
    return Budgets{alpha_bar / 2.0, std::sqrt(alpha_bar / 4.0), 0.5};
}

RenWeights direct_param(const RenTheta& t, const Normalizer& normalizer) {
    t.dims.validate();
    if (!(t.alpha_bar > 0.0 && t.alpha_bar < 1.0))
        throw std::invalid_argument("direct_param: alpha_bar must lie in (0, 1)");
    if (!(t.out_scale >= 0.0) || !std::isfinite(t.out_scale))
        throw std::invalid_argument("direct_param: out_scale must be finite and >= 0");
    const Budgets budget = Budgets::for_alpha(t.alpha_bar);

    RenWeights w;
    w.dims = t.dims;
    w.alpha_bar = t.alpha_bar;
    w.A = normalizer(t.A_free, budget.a);
    w.B1 = normalizer(t.B1_free, budget.bc);
    w.C1 = normalizer(t.C1_free, budget.bc);
    w.D11 = normalizer(t.D11_free, budget.d11).triangularView<Eigen::StrictlyLower>();
    w.B2 = normalizer(t.B2, t.out_scale);
    w.D12 = normalizer(t.D12, t.out_scale);
    w.C2 = normalizer(t.C2, t.out_scale);
    w.D21 = normalizer(t.D21, t.out_scale);
    w.D22 = normalizer(t.D22, t.out_scale);
    w.b_chi = t.b_chi;
    w.b_v = t.b_v;
    w.b_y = t.b_y;
    return w;
}

double budget_bound(const RenWeights& w) {
    return spectral_norm(w.A) + 2.0 * spectral_norm(w.B1) * spectral_norm(w.C1);
}

LipschitzBounds lipschitz_bounds(const RenWeights& w) {
    const double d11 = spectral_norm(w.D11);
    if (!(d11 < 1.0)) throw std::domain_error("lipschitz_bounds: |D11| >= 1, neuron layer not certified");
    const double inv = 1.0 / (1.0 - d11);
    LipschitzBounds b;
    const double b1 = spectral_norm(w.B1);
    const double d21 = spectral_norm(w.D21);
    b.L_w = spectral_norm(w.C1) * inv;
    b.L_wu = spectral_norm(w.D12) * inv;
    b.alpha = spectral_norm(w.A) + b1 * b.L_w;
    b.L_u = spectral_norm(w.B2) + b1 * b.L_wu;
    b.L_yx = spectral_norm(w.C2) + d21 * b.L_w;
    b.L_yu = spectral_norm(w.D22) + d21 * b.L_wu;
    return b;
}

double certified_gain(const RenWeights& w) {
    const LipschitzBounds b = lipschitz_bounds(w);
    if (!(b.alpha < 1.0))
        throw std::domain_error("certified_gain: contraction factor " + std::to_string(b.alpha) +
                                " >= 1, certificate void");
    return b.L_yu + b.L_yx * b.L_u / (1.0 - b.alpha);
}

void ren_forward(const RenWeights& w, const Vector& chi, const Vector& input, Vector& next_chi,
                 Vector& output, Vector* v_out, Vector* w_out) {
    const long nv = w.dims.n_v;
    Vector v = w.C1 * chi + w.D12 * input + w.b_v;
    Vector act(nv);
    for (long i = 0; i < nv; ++i) {
        // D11 is strictly lower triangular: row i only sees activations j < i.
        if (i > 0) v(i) += w.D11.row(i).head(i).dot(act.head(i));
        act(i) = v(i) > 0.0 ? v(i) : 0.0;
    }
    next_chi = w.A * chi + w.B1 * act + w.B2 * input + w.b_chi;
    output = w.C2 * chi + w.D21 * act + w.D22 * input + w.b_y;
    if (v_out) *v_out = std::move(v);
    if (w_out) *w_out = std::move(act);
}

RenStepResult ren_step(const RenWeights& w, const RenState& state, const Vector& input) {
    if (input.size() != w.dims.n_in || state.chi.size() != w.dims.n_chi)
        throw std::invalid_argument("ren_step: dimension mismatch");
    if (!input.allFinite() || !state.chi.allFinite())
        throw NumericalError("ren_step: non-finite input or state");
    RenStepResult r;
    ren_forward(w, state.chi, input, r.next.chi, r.output);
    return r;
}

RenReport verify_ren(const RenWeights& w, int trials, int horizon, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("verify_ren: trials must be >= 1");
    const auto& d = w.dims;
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    RenReport report;
    Vector na, nb, ya, yb;

    for (int trial = 0; trial < trials; ++trial) {
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(trial)}));

        // Forgetting of initial conditions under a shared bounded input.
        Vector xa = standard_normal(rng, d.n_chi);
        Vector xb = standard_normal(rng, d.n_chi);
        const double d0 = (xa - xb).norm();
        for (int t = 0; t < horizon; ++t) {
            Vector u(d.n_in);
            for (auto& e : u) e = unif(rng);
            ren_forward(w, xa, u, na, ya);
            ren_forward(w, xb, u, nb, yb);
            xa.swap(na);
            xb.swap(nb);
        }
        if (d0 > 0.0) report.max_decay_ratio = std::max(report.max_decay_ratio, (xa - xb).norm() / d0);

        // Incremental gain from a shared zero state.
        Vector sa = Vector::Zero(d.n_chi), sb = Vector::Zero(d.n_chi);
        double num = 0.0, den = 0.0;
        for (int t = 0; t < horizon; ++t) {
            Vector ua(d.n_in), ub(d.n_in);
            for (auto& e : ua) e = unif(rng);
            for (auto& e : ub) e = unif(rng);
            ren_forward(w, sa, ua, na, ya);
            ren_forward(w, sb, ub, nb, yb);
            sa.swap(na);
            sb.swap(nb);
            num += (ya - yb).squaredNorm();
            den += (ua - ub).squaredNorm();
        }
        if (den > 0.0) report.empirical_gain = std::max(report.empirical_gain, std::sqrt(num / den));
    }
    return report;
}

}  // namespace yoularen::ren
