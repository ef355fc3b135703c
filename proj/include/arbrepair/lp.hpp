#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "arbrepair/errors.hpp"

namespace arbrepair {

constexpr double lp_infinity = std::numeric_limits<double>::infinity();

struct lp_row {
    std::vector<std::pair<int, double>> terms;   // (variable, coefficient)
    double lower = -lp_infinity;
    double upper = lp_infinity;
};

// minimize objective . x  subject to  lower <= A x <= upper (row-wise) and
// variable bounds. Rows may be one-sided, two-sided ranges, or equalities.
struct linear_program {
    int num_variables = 0;
    std::vector<double> objective;
    std::vector<double> lower_bounds;
    std::vector<double> upper_bounds;
    std::vector<lp_row> rows;

    explicit linear_program(int n = 0) { resize(n); }

    void resize(int n) {
        num_variables = n;
        objective.assign(n, 0.0);
        lower_bounds.assign(n, -lp_infinity);
        upper_bounds.assign(n, lp_infinity);
    }

    int add_variable(double lower, double upper, double cost) {
        objective.push_back(cost);
        lower_bounds.push_back(lower);
        upper_bounds.push_back(upper);
        return num_variables++;
    }

    void add_row(std::vector<std::pair<int, double>> terms, double lower, double upper) {
        rows.push_back({std::move(terms), lower, upper});
    }
    void add_row_le(std::vector<std::pair<int, double>> terms, double rhs) {
        add_row(std::move(terms), -lp_infinity, rhs);
    }
    void add_row_ge(std::vector<std::pair<int, double>> terms, double rhs) {
        add_row(std::move(terms), rhs, lp_infinity);
    }
    void add_row_eq(std::vector<std::pair<int, double>> terms, double rhs) {
        add_row(std::move(terms), rhs, rhs);
    }
};

enum class solve_status { optimal, infeasible, unbounded, iteration_limit };

inline const char* solve_status_name(solve_status s) {
    switch (s) {
        case solve_status::optimal:         return "optimal";
        case solve_status::infeasible:      return "infeasible";
        case solve_status::unbounded:       return "unbounded";
        case solve_status::iteration_limit: return "iteration_limit";
    }
    return "unknown";
}

struct solve_options {
    double feasibility_tol = 1e-9;
    double optimality_tol = 1e-9;
    long max_iterations = 0;   // 0: 50 * (#rows + #variables)
};

struct lp_solution {
    solve_status status = solve_status::iteration_limit;
    std::vector<double> x;
    double objective_value = 0.0;
    long iterations = 0;
    // One multiplier per row: positive when the row binds at its lower bound,
    // negative at its upper bound, zero when slack. These are the exact
    // simplex multipliers of the final basis, so the dual solution of a
    // solved LP can be read off directly.
    std::vector<double> row_duals;
};

namespace lpdetail {

// Bounded-variable revised primal simplex with a dense explicit basis
// inverse. Every row gets one logical column (coefficient -1, bounds = row
// bounds), so the working system is [A | -I] z = 0 and a basis is any m
// nonsingular columns. Phase 1 minimizes total bound violation of the basic
// values with +/-1 costs through the same pivoting machinery as phase 2;
// the loop re-enters phase 1 on its own if numerical drift resurfaces.
class simplex {
public:
    simplex(const linear_program& lp, const solve_options& opt) : lp_(lp), opt_(opt) {
        m_ = static_cast<int>(lp.rows.size());
        n_ = lp.num_variables;
        total_ = n_ + m_;
        max_iter_ = opt.max_iterations > 0 ? opt.max_iterations
                                           : 50L * (static_cast<long>(m_) + n_);
        refactor_every_ = std::max<long>(200, m_);
        validate();
        build_scaled();
    }

    lp_solution run() {
        init_basis();

        lp_solution sol;
        bool confirming = false;   // terminal verdicts require fresh factors
        long stall = 0;
        double last_obj = lp_infinity;

        while (true) {
            if (iter_ - last_refactor_ >= refactor_every_) refactor();

            const bool phase1 = mark_infeasible();
            const double obj = phase1 ? total_infeasibility() : scaled_objective();
            if (obj < last_obj - 1e-12 * (1.0 + std::abs(last_obj))) {
                stall = 0;
            } else if (++stall > stall_limit_) {
                bland_ = true;   // anti-cycling: stay on Bland's rule once triggered
            }
            last_obj = obj;

            const std::vector<double>& costs = phase1 ? phase1_costs() : cost_;
            compute_duals(costs, phase1);

            int entering = -1, direction = 0;
            price(costs, phase1, entering, direction);

            if (entering < 0) {
                // no improving column: optimal here, or genuinely infeasible
                if (!confirming && iter_ != last_refactor_) {
                    refactor();
                    confirming = true;
                    last_obj = lp_infinity;
                    continue;
                }
                return finish(sol, phase1 ? solve_status::infeasible : solve_status::optimal);
            }

            if (iter_ >= max_iter_) return finish(sol, solve_status::iteration_limit);
            ++iter_;

            ftran(entering);

            double step = lp_infinity;
            int leave_pos = -1, leave_side = 0;
            ratio_test(entering, direction, phase1, step, leave_pos, leave_side);

            if (leave_pos == no_blocker_) {
                if (phase1) return finish(sol, solve_status::infeasible);
                if (!confirming && iter_ - 1 != last_refactor_) {
                    refactor();
                    confirming = true;
                    last_obj = lp_infinity;
                    continue;
                }
                return finish(sol, solve_status::unbounded);
            }
            confirming = false;

            if (leave_pos == bound_flip_)
                apply_bound_flip(entering, direction, step);
            else
                apply_pivot(entering, direction, step, leave_pos, leave_side);
        }
    }

private:
    static constexpr int no_blocker_ = -1;
    static constexpr int bound_flip_ = -2;
    static constexpr double pivot_tol_ = 1e-11;
    static constexpr long stall_limit_ = 100;

    const linear_program& lp_;
    const solve_options& opt_;
    int m_ = 0, n_ = 0, total_ = 0;
    long max_iter_ = 0, iter_ = 0, last_refactor_ = 0;
    long refactor_every_ = 200;
    bool bland_ = false;

    // scaled problem, columns of [A | -I] stored sparse
    std::vector<std::vector<std::pair<int, double>>> col_;
    std::vector<double> cost_, lo_, hi_;       // per column
    std::vector<double> row_scale_, col_scale_;

    std::vector<int> basis_;                   // column sitting in each basis position
    std::vector<int> pos_;                     // column -> basis position, -1 if nonbasic
    enum nb_state : std::int8_t { nb_lower, nb_upper, nb_free };
    std::vector<std::int8_t> state_;
    std::vector<double> binv_;                 // m x m, row-major
    std::vector<double> xb_;                   // basic values
    std::vector<double> pi_;                   // duals of the current pricing pass
    std::vector<double> work_;                 // ftran result
    std::vector<std::int8_t> infeas_;          // -1 below lower, +1 above upper
    std::vector<double> p1cost_;               // phase-1 cost per basis position

    void validate() const {
        auto check_bound_pair = [](double lo, double hi, const std::string& what) {
            if (std::isnan(lo) || std::isnan(hi))
                throw error(errc::invalid_argument, what + ": NaN bound");
            if (lo > hi)
                throw error(errc::invalid_argument, what + ": lower bound above upper");
        };
        if (static_cast<int>(lp_.objective.size()) != n_ ||
            static_cast<int>(lp_.lower_bounds.size()) != n_ ||
            static_cast<int>(lp_.upper_bounds.size()) != n_)
            throw error(errc::dimension_mismatch, "objective/bounds size mismatch");
        for (int j = 0; j < n_; ++j) {
            if (!std::isfinite(lp_.objective[j]))
                throw error(errc::invalid_argument, "non-finite objective coefficient");
            check_bound_pair(lp_.lower_bounds[j], lp_.upper_bounds[j],
                             "variable " + std::to_string(j));
        }
        for (std::size_t i = 0; i < lp_.rows.size(); ++i) {
            check_bound_pair(lp_.rows[i].lower, lp_.rows[i].upper, "row " + std::to_string(i));
            for (const auto& [v, a] : lp_.rows[i].terms) {
                if (v < 0 || v >= n_)
                    throw error(errc::invalid_argument,
                                "row " + std::to_string(i) + " references variable " +
                                    std::to_string(v));
                if (!std::isfinite(a))
                    throw error(errc::invalid_argument,
                                "row " + std::to_string(i) + ": non-finite coefficient");
            }
        }
    }

    // powers of two keep the scaling exact in floating point
    static double pow2_scale(double max_abs) {
        if (max_abs <= 0.0) return 1.0;
        const double s = std::exp2(std::round(-std::log2(max_abs)));
        return std::clamp(s, 0x1p-20, 0x1p20);
    }

    void build_scaled() {
        row_scale_.assign(m_, 1.0);
        col_scale_.assign(n_, 1.0);
        for (int i = 0; i < m_; ++i) {
            double mx = 0.0;
            for (const auto& [v, a] : lp_.rows[i].terms) mx = std::max(mx, std::abs(a));
            row_scale_[i] = pow2_scale(mx);
        }
        std::vector<double> col_max(n_, 0.0);
        for (int i = 0; i < m_; ++i)
            for (const auto& [v, a] : lp_.rows[i].terms)
                col_max[v] = std::max(col_max[v], std::abs(a) * row_scale_[i]);
        for (int j = 0; j < n_; ++j) col_scale_[j] = pow2_scale(col_max[j]);

        col_.assign(total_, {});
        cost_.assign(total_, 0.0);
        lo_.assign(total_, -lp_infinity);
        hi_.assign(total_, lp_infinity);
        for (int j = 0; j < n_; ++j) {
            cost_[j] = lp_.objective[j] * col_scale_[j];
            lo_[j] = lp_.lower_bounds[j] / col_scale_[j];
            hi_[j] = lp_.upper_bounds[j] / col_scale_[j];
        }
        for (int i = 0; i < m_; ++i)
            for (const auto& [v, a] : lp_.rows[i].terms)
                if (a != 0.0) col_[v].push_back({i, a * row_scale_[i] * col_scale_[v]});
        for (int i = 0; i < m_; ++i) {
            col_[n_ + i].push_back({i, -1.0});
            lo_[n_ + i] = lp_.rows[i].lower * row_scale_[i];
            hi_[n_ + i] = lp_.rows[i].upper * row_scale_[i];
        }
    }

    double nonbasic_value(int j) const {
        switch (state_[j]) {
            case nb_lower: return lo_[j];
            case nb_upper: return hi_[j];
            default:       return 0.0;
        }
    }

    void init_basis() {
        basis_.resize(m_);
        pos_.assign(total_, -1);
        state_.assign(total_, nb_free);
        for (int j = 0; j < n_; ++j) {
            if (std::isfinite(lo_[j]))
                state_[j] = nb_lower;
            else if (std::isfinite(hi_[j]))
                state_[j] = nb_upper;
        }
        for (int i = 0; i < m_; ++i) {
            basis_[i] = n_ + i;
            pos_[n_ + i] = i;
        }
        binv_.assign(static_cast<std::size_t>(m_) * m_, 0.0);
        for (int i = 0; i < m_; ++i) binv_[static_cast<std::size_t>(i) * m_ + i] = -1.0;
        pi_.assign(m_, 0.0);
        work_.assign(m_, 0.0);
        infeas_.assign(m_, 0);
        p1cost_.assign(m_, 0.0);
        compute_basics();
        last_refactor_ = iter_;
    }

    // xb = -Binv * (sum of nonbasic columns at their values)
    void compute_basics() {
        std::vector<double> rhs(m_, 0.0);
        for (int j = 0; j < total_; ++j) {
            if (pos_[j] >= 0) continue;
            const double v = nonbasic_value(j);
            if (v == 0.0) continue;
            for (const auto& [r, a] : col_[j]) rhs[r] += a * v;
        }
        xb_.assign(m_, 0.0);
        for (int i = 0; i < m_; ++i) {
            const double* row = &binv_[static_cast<std::size_t>(i) * m_];
            double acc = 0.0;
            for (int r = 0; r < m_; ++r) acc += row[r] * rhs[r];
            xb_[i] = -acc;
        }
    }

    // rebuild the inverse from the basis columns by Gauss-Jordan with partial
    // pivoting, then recompute the basic values from scratch
    void refactor() {
        std::vector<double> mat(static_cast<std::size_t>(m_) * m_, 0.0);
        for (int p = 0; p < m_; ++p)
            for (const auto& [r, a] : col_[basis_[p]])
                mat[static_cast<std::size_t>(r) * m_ + p] = a;
        std::vector<double> inv(static_cast<std::size_t>(m_) * m_, 0.0);
        for (int i = 0; i < m_; ++i) inv[static_cast<std::size_t>(i) * m_ + i] = 1.0;

        for (int c = 0; c < m_; ++c) {
            int piv = -1;
            double best = 0.0;
            for (int r = c; r < m_; ++r) {
                const double v = std::abs(mat[static_cast<std::size_t>(r) * m_ + c]);
                if (v > best) { best = v; piv = r; }
            }
            if (piv < 0 || best < 1e-13)
                throw error(errc::solver_failure, "singular basis during refactorization");
            if (piv != c)
                for (int k = 0; k < m_; ++k) {
                    std::swap(mat[static_cast<std::size_t>(piv) * m_ + k],
                              mat[static_cast<std::size_t>(c) * m_ + k]);
                    std::swap(inv[static_cast<std::size_t>(piv) * m_ + k],
                              inv[static_cast<std::size_t>(c) * m_ + k]);
                }
            const double d = 1.0 / mat[static_cast<std::size_t>(c) * m_ + c];
            for (int k = 0; k < m_; ++k) {
                mat[static_cast<std::size_t>(c) * m_ + k] *= d;
                inv[static_cast<std::size_t>(c) * m_ + k] *= d;
            }
            for (int r = 0; r < m_; ++r) {
                if (r == c) continue;
                const double f = mat[static_cast<std::size_t>(r) * m_ + c];
                if (f == 0.0) continue;
                for (int k = 0; k < m_; ++k) {
                    mat[static_cast<std::size_t>(r) * m_ + k] -=
                        f * mat[static_cast<std::size_t>(c) * m_ + k];
                    inv[static_cast<std::size_t>(r) * m_ + k] -=
                        f * inv[static_cast<std::size_t>(c) * m_ + k];
                }
            }
        }
        binv_ = std::move(inv);
        compute_basics();
        last_refactor_ = iter_;
    }

    bool mark_infeasible() {
        bool any = false;
        const double ftol = opt_.feasibility_tol;
        for (int p = 0; p < m_; ++p) {
            const int q = basis_[p];
            infeas_[p] = 0;
            if (xb_[p] < lo_[q] - ftol) { infeas_[p] = -1; any = true; }
            else if (xb_[p] > hi_[q] + ftol) { infeas_[p] = 1; any = true; }
        }
        return any;
    }

    double total_infeasibility() const {
        double t = 0.0;
        for (int p = 0; p < m_; ++p) {
            const int q = basis_[p];
            if (infeas_[p] < 0) t += lo_[q] - xb_[p];
            else if (infeas_[p] > 0) t += xb_[p] - hi_[q];
        }
        return t;
    }

    double scaled_objective() const {
        double obj = 0.0;
        for (int p = 0; p < m_; ++p) obj += cost_[basis_[p]] * xb_[p];
        for (int j = 0; j < total_; ++j)
            if (pos_[j] < 0 && cost_[j] != 0.0) obj += cost_[j] * nonbasic_value(j);
        return obj;
    }

    const std::vector<double>& phase1_costs() {
        for (int p = 0; p < m_; ++p) p1cost_[p] = static_cast<double>(infeas_[p]);
        return p1cost_;
    }

    // pi = costs_B . Binv; phase-1 costs are per basis position, phase-2 per column
    void compute_duals(const std::vector<double>& costs, bool per_position) {
        for (int r = 0; r < m_; ++r) pi_[r] = 0.0;
        for (int p = 0; p < m_; ++p) {
            const double cb = per_position ? costs[p] : costs[basis_[p]];
            if (cb == 0.0) continue;
            const double* row = &binv_[static_cast<std::size_t>(p) * m_];
            for (int r = 0; r < m_; ++r) pi_[r] += cb * row[r];
        }
    }

    double reduced_cost(int j, const std::vector<double>& costs, bool per_position) const {
        double rc = per_position ? 0.0 : costs[j];
        for (const auto& [r, a] : col_[j]) rc -= pi_[r] * a;
        return rc;
    }

    void price(const std::vector<double>& costs, bool per_position, int& entering,
               int& direction) const {
        entering = -1;
        direction = 0;
        double best = opt_.optimality_tol;
        for (int j = 0; j < total_; ++j) {
            if (pos_[j] >= 0) continue;
            if (lo_[j] == hi_[j]) continue;   // fixed, can never move
            const double rc = reduced_cost(j, costs, per_position);
            int dir = 0;
            if (state_[j] != nb_upper && rc < -opt_.optimality_tol) dir = 1;
            else if (state_[j] != nb_lower && rc > opt_.optimality_tol) dir = -1;
            if (dir == 0) continue;
            if (bland_) { entering = j; direction = dir; return; }
            if (std::abs(rc) > best) {
                best = std::abs(rc);
                entering = j;
                direction = dir;
            }
        }
    }

    void ftran(int j) {
        for (int i = 0; i < m_; ++i) work_[i] = 0.0;
        for (const auto& [r, a] : col_[j]) {
            const double* colr = &binv_[r];
            for (int i = 0; i < m_; ++i) work_[i] += a * colr[static_cast<std::size_t>(i) * m_];
        }
    }

    // The entering column moves by sigma*t, t >= 0; basic p changes at rate
    // -sigma*work_[p]. Feasible basics block at their own bounds; in phase 1,
    // violated basics block at the bound they are violating (where they turn
    // feasible). leave_side records which bound the leaving variable hits.
    void ratio_test(int entering, int direction, bool phase1, double& step, int& leave_pos,
                    int& leave_side) const {
        const double sigma = direction;
        step = lp_infinity;
        leave_pos = no_blocker_;
        leave_side = 0;

        const double range = hi_[entering] - lo_[entering];
        if (std::isfinite(range)) {
            step = range;
            leave_pos = bound_flip_;
        }

        double best_piv = 0.0;
        for (int p = 0; p < m_; ++p) {
            const double w = work_[p];
            if (std::abs(w) < pivot_tol_) continue;
            const double rate = -sigma * w;
            const int q = basis_[p];
            double limit = lp_infinity;
            int side = 0;
            if (phase1 && infeas_[p] != 0) {
                if (infeas_[p] > 0 && rate < 0.0) { limit = (xb_[p] - hi_[q]) / -rate; side = 1; }
                else if (infeas_[p] < 0 && rate > 0.0) { limit = (lo_[q] - xb_[p]) / rate; side = -1; }
            } else if (rate > 0.0 && std::isfinite(hi_[q])) {
                limit = (hi_[q] - xb_[p]) / rate;
                side = 1;
            } else if (rate < 0.0 && std::isfinite(lo_[q])) {
                limit = (xb_[p] - lo_[q]) / -rate;
                side = -1;
            }
            if (side == 0) continue;
            limit = std::max(limit, 0.0);

            bool take;
            if (leave_pos < 0) {
                take = limit < step;               // against no blocker / pure bound flip
            } else if (limit < step - 1e-12) {
                take = true;
            } else if (limit > step + 1e-12) {
                take = false;
            } else if (bland_) {
                take = q < basis_[leave_pos];      // lowest leaving index on ties
            } else {
                take = std::abs(w) > best_piv;     // largest pivot on ties
            }
            if (take) {
                step = std::min(step, limit);
                leave_pos = p;
                leave_side = side;
                best_piv = std::abs(w);
            }
        }
    }

    void apply_bound_flip(int entering, int direction, double step) {
        const double sigma = direction;
        for (int p = 0; p < m_; ++p) xb_[p] -= sigma * step * work_[p];
        state_[entering] = (state_[entering] == nb_lower) ? nb_upper : nb_lower;
    }

    void apply_pivot(int entering, int direction, double step, int leave_pos, int leave_side) {
        const double sigma = direction;
        const double enter_val = nonbasic_value(entering) + sigma * step;
        const int leaving = basis_[leave_pos];

        for (int p = 0; p < m_; ++p) xb_[p] -= sigma * step * work_[p];
        xb_[leave_pos] = enter_val;

        pos_[leaving] = -1;
        state_[leaving] = leave_side > 0 ? nb_upper : nb_lower;
        basis_[leave_pos] = entering;
        pos_[entering] = leave_pos;

        // eta update: Binv <- E . Binv with the pivot at basis position leave_pos
        const double piv = work_[leave_pos];
        double* prow = &binv_[static_cast<std::size_t>(leave_pos) * m_];
        for (int k = 0; k < m_; ++k) prow[k] /= piv;
        for (int i = 0; i < m_; ++i) {
            if (i == leave_pos) continue;
            const double f = work_[i];
            if (f == 0.0) continue;
            double* row = &binv_[static_cast<std::size_t>(i) * m_];
            for (int k = 0; k < m_; ++k) row[k] -= f * prow[k];
        }
    }

    lp_solution finish(lp_solution& sol, solve_status status) {
        sol.status = status;
        sol.iterations = iter_;
        sol.x.assign(n_, 0.0);
        for (int j = 0; j < n_; ++j) {
            const double v = pos_[j] >= 0 ? xb_[pos_[j]] : nonbasic_value(j);
            sol.x[j] = v * col_scale_[j];
        }
        double obj = 0.0;
        for (int j = 0; j < n_; ++j) obj += lp_.objective[j] * sol.x[j];
        sol.objective_value = obj;

        compute_duals(cost_, false);
        sol.row_duals.assign(m_, 0.0);
        for (int i = 0; i < m_; ++i) sol.row_duals[i] = pi_[i] * row_scale_[i];
        return sol;
    }
};

} // namespace lpdetail

inline lp_solution solve(const linear_program& lp, const solve_options& options = {}) {
    lpdetail::simplex s(lp, options);
    return s.run();
}

} // namespace arbrepair
