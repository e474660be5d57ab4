#include "elhom/solver.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace elhom {

std::vector<Field> orthonormalize(std::vector<Field> vs) {
    std::vector<Field> out;
    for (auto &v : vs) {
        for (int pass = 0; pass < 2; ++pass)
            for (const auto &u : out) v -= u.dot(v) * u;
        const double n = v.norm();
        if (n > 0.0) out.push_back(v / n);
    }
    return out;
}

void project_out(const std::vector<Field> &basis, Field &v) {
    for (const auto &u : basis) v -= u.dot(v) * u;
}

template <int D>
JacobiPreconditioner<D>::JacobiPreconditioner(const StencilOperator<D> &op) {
    inv_diag_.resize(op.size());
    const int nc = op.ncomp();
    for (Index node = 0; node < op.grid().node_count(); ++node)
        for (int c = 0; c < nc; ++c) {
            const double d = op.at(node, StencilOperator<D>::kCenter, c, c);
            inv_diag_[node * nc + c] = d != 0.0 ? 1.0 / d : 0.0;
        }
}

template <int D>
void JacobiPreconditioner<D>::apply(const Field &r, Field &z) const {
    z = inv_diag_.cwiseProduct(r);
}

namespace {

constexpr Index kMaxDenseCoarse = 3000;

/// Coarse parents of fine coordinate f: one (weight 1) when even, two
/// (weight 1/2) when odd.
inline int parents(Index f, Index out[2], double w[2]) {
    if (f % 2 == 0) {
        out[0] = f / 2;
        w[0] = 1.0;
        return 1;
    }
    out[0] = (f - 1) / 2;
    out[1] = (f + 1) / 2;
    w[0] = w[1] = 0.5;
    return 2;
}

inline Index floor_div2(Index f) { return f >= 0 ? f / 2 : -((-f + 1) / 2); }

} // namespace

template <int D>
MultigridPreconditioner<D>::MultigridPreconditioner(const StencilOperator<D> &op,
                                                    const std::vector<char> &constrained,
                                                    int sweeps, Index min_cells)
    : sweeps_(sweeps) {
    ops_.push_back(op);
    masks_.push_back(constrained.empty() ? std::vector<char>(op.size(), 0) : constrained);
    const int nc = op.ncomp();
    constexpr int S = StencilOperator<D>::kSlots;

    while (ops_.back().grid().can_coarsen(min_cells) &&
           ops_.back().size() > 64) {
        const StencilOperator<D> &fine = ops_.back();
        const std::vector<char> &fmask = masks_.back();
        const Grid<D> &fg = fine.grid();
        const Grid<D> cg = fg.coarsened();
        if (cg.periodic) {
            bool ok = true;
            for (int t = 0; t < D; ++t) ok = ok && cg.cells[t] >= 3;
            if (!ok) break;
        }
        StencilOperator<D> coarse(cg, nc);
        std::vector<char> cmask(coarse.size(), 0);
        for (Index cn = 0; cn < cg.node_count(); ++cn) {
            MultiIndex<D> m = cg.node_multi(cn);
            for (int t = 0; t < D; ++t) m[t] *= 2;
            const Index fn = fg.node_index(m);
            for (int c = 0; c < nc; ++c) cmask[cn * nc + c] = fmask[fn * nc + c];
        }

        auto inside = [&](const MultiIndex<D> &f) {
            if (fg.periodic) return true;
            for (int t = 0; t < D; ++t)
                if (f[t] < 0 || f[t] > fg.cells[t]) return false;
            return true;
        };

        for (Index cn = 0; cn < cg.node_count(); ++cn) {
            const MultiIndex<D> M = cg.node_multi(cn);
            for (int os = 0; os < S; ++os) {
                const auto o = StencilOperator<D>::offset_of(os);
                MultiIndex<D> fi;
                double wi = 1.0;
                for (int t = 0; t < D; ++t) {
                    fi[t] = 2 * M[t] + o[t];
                    if (o[t] != 0) wi *= 0.5;
                }
                if (!inside(fi)) continue;
                const Index inode = fg.node_index(fi);
                for (int s = 0; s < S; ++s) {
                    const auto so = StencilOperator<D>::offset_of(s);
                    MultiIndex<D> fj;
                    for (int t = 0; t < D; ++t) fj[t] = fi[t] + so[t];
                    if (!inside(fj)) continue;
                    const Index jnode = fg.node_index(fj);
                    // enumerate coarse parents of fj
                    std::array<Index[2], D> par;
                    std::array<double[2], D> pw;
                    std::array<int, D> pc;
                    for (int t = 0; t < D; ++t) {
                        const Index base = floor_div2(fj[t]);
                        if (fj[t] - 2 * base == 0) {
                            par[t][0] = base;
                            pw[t][0] = 1.0;
                            pc[t] = 1;
                        } else {
                            par[t][0] = base;
                            par[t][1] = base + 1;
                            pw[t][0] = pw[t][1] = 0.5;
                            pc[t] = 2;
                        }
                    }
                    int total = 1;
                    for (int t = 0; t < D; ++t) total *= pc[t];
                    for (int combo = 0; combo < total; ++combo) {
                        int rem = combo;
                        std::array<int, D> off;
                        MultiIndex<D> J;
                        double wj = 1.0;
                        for (int t = 0; t < D; ++t) {
                            const int k = rem % pc[t];
                            rem /= pc[t];
                            J[t] = par[t][k];
                            wj *= pw[t][k];
                            off[t] = static_cast<int>(J[t] - M[t]);
                        }
                        const Index jc = cg.node_index(J);
                        const int cs = StencilOperator<D>::slot_of(off);
                        for (int c = 0; c < nc; ++c) {
                            if (fmask[inode * nc + c] || cmask[cn * nc + c]) continue;
                            for (int c2 = 0; c2 < nc; ++c2) {
                                if (fmask[jnode * nc + c2] || cmask[jc * nc + c2]) continue;
                                coarse.at(cn, cs, c, c2) += wi * wj * fine.at(inode, s, c, c2);
                            }
                        }
                    }
                }
            }
            for (int c = 0; c < nc; ++c)
                if (cmask[cn * nc + c]) coarse.at(cn, StencilOperator<D>::kCenter, c, c) = 1.0;
        }
        ops_.push_back(std::move(coarse));
        masks_.push_back(std::move(cmask));
    }

    block_inv_.resize(ops_.size());
    for (std::size_t l = 0; l < ops_.size(); ++l) {
        const auto &A = ops_[l];
        block_inv_[l].resize(A.grid().node_count());
        for (Index node = 0; node < A.grid().node_count(); ++node) {
            Eigen::MatrixXd blk(nc, nc);
            for (int c = 0; c < nc; ++c)
                for (int c2 = 0; c2 < nc; ++c2)
                    blk(c, c2) = A.at(node, StencilOperator<D>::kCenter, c, c2);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (blk + blk.transpose()));
            Eigen::VectorXd ev = es.eigenvalues();
            const double top = ev.cwiseAbs().maxCoeff();
            for (int k = 0; k < nc; ++k) ev[k] = ev[k] > 1e-14 * top ? 1.0 / ev[k] : 0.0;
            block_inv_[l][node] = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
        }
    }

    if (ops_.back().size() <= kMaxDenseCoarse) {
        const Eigen::MatrixXd dense = ops_.back().dense();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (dense + dense.transpose()));
        Eigen::VectorXd ev = es.eigenvalues();
        const double top = ev.cwiseAbs().maxCoeff();
        for (Index k = 0; k < ev.size(); ++k) ev[k] = ev[k] > 1e-11 * top ? 1.0 / ev[k] : 0.0;
        coarse_pinv_ = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    }
}

template <int D>
void MultigridPreconditioner<D>::smooth(int level, const Field &b, Field &x, bool forward) const {
    const auto &A = ops_[level];
    const int nc = A.ncomp();
    constexpr int S = StencilOperator<D>::kSlots;
    const Index nn = A.grid().node_count();
    std::array<Index, S> nb;
    Eigen::VectorXd r(nc);
    for (Index k = 0; k < nn; ++k) {
        const Index node = forward ? k : nn - 1 - k;
        A.neighbours(node, nb);
        for (int c = 0; c < nc; ++c) r[c] = b[node * nc + c];
        for (int s = 0; s < S; ++s) {
            if (s == StencilOperator<D>::kCenter || nb[s] < 0) continue;
            for (int c = 0; c < nc; ++c)
                for (int c2 = 0; c2 < nc; ++c2) r[c] -= A.at(node, s, c, c2) * x[nb[s] * nc + c2];
        }
        x.segment(node * nc, nc) = block_inv_[level][node] * r;
    }
}

template <int D>
void MultigridPreconditioner<D>::restrict_to(int level, const Field &fine, Field &coarse) const {
    // level -> level + 1, transpose of prolong_add
    const auto &fg = ops_[level].grid();
    const auto &cg = ops_[level + 1].grid();
    const int nc = ops_[level].ncomp();
    const auto &fmask = masks_[level];
    const auto &cmask = masks_[level + 1];
    coarse = Field::Zero(ops_[level + 1].size());
    for (Index fn = 0; fn < fg.node_count(); ++fn) {
        const MultiIndex<D> f = fg.node_multi(fn);
        std::array<Index[2], D> par;
        std::array<double[2], D> pw;
        std::array<int, D> pc;
        int total = 1;
        for (int t = 0; t < D; ++t) {
            pc[t] = parents(f[t], par[t], pw[t]);
            total *= pc[t];
        }
        for (int combo = 0; combo < total; ++combo) {
            int rem = combo;
            MultiIndex<D> J;
            double w = 1.0;
            for (int t = 0; t < D; ++t) {
                const int k = rem % pc[t];
                rem /= pc[t];
                J[t] = par[t][k];
                w *= pw[t][k];
            }
            const Index cn = cg.node_index(J);
            for (int c = 0; c < nc; ++c)
                if (!fmask[fn * nc + c] && !cmask[cn * nc + c])
                    coarse[cn * nc + c] += w * fine[fn * nc + c];
        }
    }
}

template <int D>
void MultigridPreconditioner<D>::prolong_add(int level, const Field &coarse, Field &fine) const {
    const auto &fg = ops_[level].grid();
    const auto &cg = ops_[level + 1].grid();
    const int nc = ops_[level].ncomp();
    const auto &fmask = masks_[level];
    const auto &cmask = masks_[level + 1];
    for (Index fn = 0; fn < fg.node_count(); ++fn) {
        const MultiIndex<D> f = fg.node_multi(fn);
        std::array<Index[2], D> par;
        std::array<double[2], D> pw;
        std::array<int, D> pc;
        int total = 1;
        for (int t = 0; t < D; ++t) {
            pc[t] = parents(f[t], par[t], pw[t]);
            total *= pc[t];
        }
        for (int combo = 0; combo < total; ++combo) {
            int rem = combo;
            MultiIndex<D> J;
            double w = 1.0;
            for (int t = 0; t < D; ++t) {
                const int k = rem % pc[t];
                rem /= pc[t];
                J[t] = par[t][k];
                w *= pw[t][k];
            }
            const Index cn = cg.node_index(J);
            for (int c = 0; c < nc; ++c)
                if (!fmask[fn * nc + c] && !cmask[cn * nc + c])
                    fine[fn * nc + c] += w * coarse[cn * nc + c];
        }
    }
}

template <int D>
void MultigridPreconditioner<D>::cycle(int level, const Field &b, Field &x) const {
    const auto &A = ops_[level];
    x = Field::Zero(A.size());
    if (level + 1 == static_cast<int>(ops_.size())) {
        if (coarse_pinv_.size() > 0) {
            x = coarse_pinv_ * b;
        } else {
            for (int k = 0; k < 10 * sweeps_; ++k) {
                smooth(level, b, x, true);
                smooth(level, b, x, false);
            }
        }
        return;
    }
    for (int k = 0; k < sweeps_; ++k) smooth(level, b, x, true);
    Field r = b - A * x;
    Field rc, xc;
    restrict_to(level, r, rc);
    cycle(level + 1, rc, xc);
    prolong_add(level, xc, x);
    for (int k = 0; k < sweeps_; ++k) smooth(level, b, x, false);
}

template <int D>
void MultigridPreconditioner<D>::apply(const Field &r, Field &z) const {
    cycle(0, r, z);
}

template <int D>
std::unique_ptr<Preconditioner<D>> make_preconditioner(const std::string &name,
                                                       const StencilOperator<D> &op,
                                                       const std::vector<char> &constrained) {
    if (name == "jacobi") return std::make_unique<JacobiPreconditioner<D>>(op);
    if (name == "multigrid") return std::make_unique<MultigridPreconditioner<D>>(op, constrained);
    throw ConfigError("unknown preconditioner '" + name + "'");
}

template <int D>
SolveStats pcg(const StencilOperator<D> &op, const Field &b_in, Field &x, double tol,
               const Preconditioner<D> &prec, const std::vector<Field> &nullspace,
               double abs_floor, int max_iter) {
    SolveStats st;
    Field b = b_in;
    project_out(nullspace, b);
    st.rhs_norm = b.norm();
    if (x.size() != op.size()) x = Field::Zero(op.size());
    if (st.rhs_norm <= abs_floor) {
        x.setZero();
        return st;
    }
    project_out(nullspace, x);
    Field r = b - op * x;
    project_out(nullspace, r);
    Field z, p, q;
    prec.apply(r, z);
    project_out(nullspace, z);
    p = z;
    double rz = r.dot(z);
    double rn = r.norm();
    const double target = std::max(tol * st.rhs_norm, abs_floor);
    int it = 0;
    for (;;) {
        if (rn <= target) {
            r = b - op * x;
            project_out(nullspace, r);
            rn = r.norm();
            if (rn <= target) break;
            prec.apply(r, z);
            project_out(nullspace, z);
            p = z;
            rz = r.dot(z);
        }
        if (it >= max_iter) throw SolverDiverged(tol, it, rn / st.rhs_norm);
        op.apply(p, q);
        const double pq = p.dot(q);
        if (!(pq > 0.0)) throw SolverDiverged(tol, it, rn / st.rhs_norm);
        const double alpha = rz / pq;
        x += alpha * p;
        r -= alpha * q;
        ++it;
        if (it % 50 == 0) {
            // guard against drift of the recursive residual
            r = b - op * x;
            project_out(nullspace, r);
        }
        rn = r.norm();
        prec.apply(r, z);
        project_out(nullspace, z);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    project_out(nullspace, x);
    Field res = b - op * x;
    project_out(nullspace, res);
    st.iterations = it;
    st.residual = res.norm() / st.rhs_norm;
    return st;
}

#define ELHOM_INSTANTIATE(D)                                                                   \
    template class JacobiPreconditioner<D>;                                                    \
    template class MultigridPreconditioner<D>;                                                 \
    template std::unique_ptr<Preconditioner<D>> make_preconditioner<D>(                        \
        const std::string &, const StencilOperator<D> &, const std::vector<char> &);           \
    template SolveStats pcg<D>(const StencilOperator<D> &, const Field &, Field &, double,     \
                               const Preconditioner<D> &, const std::vector<Field> &, double, int);

ELHOM_INSTANTIATE(2)

} // namespace elhom
