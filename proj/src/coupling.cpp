#include "corrph/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace corrph {

namespace {

constexpr double mass_floor = 1e-15;

struct Support {
    std::vector<int> rows;
    std::vector<int> cols;
};

Support support_of(const TransportProblem& p) {
    const auto n_rows = p.row_mass.size(), n_cols = p.col_mass.size();
    if (n_rows == 0 || n_cols == 0) throw Infeasible("transportation problem needs rows and columns");
    if (p.row_value.size() != n_rows || p.col_value.size() != n_cols)
        throw Infeasible("values and masses differ in length");
    if (p.row_mass.minCoeff() < -1e-12 || p.col_mass.minCoeff() < -1e-12)
        throw Infeasible("negative mass in transportation problem");
    if (std::abs(p.row_mass.sum() - p.col_mass.sum()) >= 1e-12)
        throw Infeasible("infeasible transportation problem: row and column masses differ");
    Support s;
    for (Eigen::Index i = 0; i < n_rows; ++i)
        if (p.row_mass(i) > mass_floor) s.rows.push_back(static_cast<int>(i));
    for (Eigen::Index j = 0; j < n_cols; ++j)
        if (p.col_mass(j) > mass_floor) s.cols.push_back(static_cast<int>(j));
    return s;
}

// Column masses rescaled so that both sides of the reduced problem balance exactly.
std::pair<std::vector<double>, std::vector<double>> reduced_masses(const TransportProblem& p, const Support& s) {
    std::vector<double> u, v;
    for (int i : s.rows) u.push_back(p.row_mass(i));
    for (int j : s.cols) v.push_back(p.col_mass(j));
    const double su = std::accumulate(u.begin(), u.end(), 0.0);
    const double sv = std::accumulate(v.begin(), v.end(), 0.0);
    for (double& x : v) x *= su / sv;
    return {u, v};
}

Coupling finish(const TransportProblem& p, Matrix flow) {
    flow = flow.cwiseMax(0.0);
    Coupling c;
    c.objective = p.row_value.dot(flow * p.col_value);
    c.rho = realized_rho(p, flow);
    c.flow = std::move(flow);
    return c;
}

// North-west corner fill of an (already ordered) problem; returns the
// staircase cells, always rows + cols - 1 of them.
std::vector<std::pair<int, int>> north_west(std::vector<double> u, std::vector<double> v, Matrix& x) {
    const int m = static_cast<int>(u.size()), n = static_cast<int>(v.size());
    x = Matrix::Zero(m, n);
    std::vector<std::pair<int, int>> cells;
    int i = 0, j = 0;
    while (true) {
        const double f = std::min(u[i], v[j]);
        x(i, j) = f;
        cells.emplace_back(i, j);
        u[i] -= f;
        v[j] -= f;
        if (i == m - 1 && j == n - 1) break;
        if ((u[i] <= 0.0 && i < m - 1) || j == n - 1)
            ++i;
        else
            ++j;
    }
    return cells;
}

class TransportSimplex {
public:
    TransportSimplex(Matrix cost, std::vector<double> u, std::vector<double> v)
        : cost_(std::move(cost)), m_(static_cast<int>(u.size())), n_(static_cast<int>(v.size())) {
        basic_ = north_west(std::move(u), std::move(v), flow_);
        eps_ = 1e-12 * std::max(1.0, cost_.cwiseAbs().maxCoeff());
    }

    const Matrix& run() {
        int degenerate_run = 0;
        bool bland = false;
        for (int iter = 0; iter < 200000; ++iter) {
            potentials();
            const auto entering = pick_entering(bland);
            if (!entering) {
                certify();
                return flow_;
            }
            const double theta = pivot(*entering);
            if (theta <= 1e-15) {
                if (++degenerate_run > 50) bland = true;
            } else {
                degenerate_run = 0;
            }
        }
        throw Error("transportation simplex did not converge");
    }

private:
    void potentials() {
        row_pot_.assign(m_, 0.0);
        col_pot_.assign(n_, 0.0);
        std::vector<char> row_done(m_, 0), col_done(n_, 0);
        adjacency();
        std::deque<int> queue{0};  // node ids: rows 0..m-1, columns m..m+n-1
        row_done[0] = 1;
        while (!queue.empty()) {
            const int node = queue.front();
            queue.pop_front();
            for (const auto& [other, cell] : adj_[node]) {
                const auto [i, j] = basic_[cell];
                if (node < m_ && !col_done[j]) {
                    col_pot_[j] = cost_(i, j) - row_pot_[i];
                    col_done[j] = 1;
                    queue.push_back(other);
                } else if (node >= m_ && !row_done[i]) {
                    row_pot_[i] = cost_(i, j) - col_pot_[j];
                    row_done[i] = 1;
                    queue.push_back(other);
                }
            }
        }
    }

    void adjacency() {
        adj_.assign(m_ + n_, {});
        for (std::size_t c = 0; c < basic_.size(); ++c) {
            const auto [i, j] = basic_[c];
            adj_[i].emplace_back(m_ + j, static_cast<int>(c));
            adj_[m_ + j].emplace_back(i, static_cast<int>(c));
        }
    }

    double reduced(int i, int j) const { return cost_(i, j) - row_pot_[i] - col_pot_[j]; }

    std::optional<std::pair<int, int>> pick_entering(bool bland) const {
        std::optional<std::pair<int, int>> best;
        double best_value = -eps_;
        for (int i = 0; i < m_; ++i)
            for (int j = 0; j < n_; ++j) {
                const double r = reduced(i, j);
                if (r < best_value) {
                    if (bland) return std::make_pair(i, j);
                    best_value = r;
                    best = std::make_pair(i, j);
                }
            }
        return best;
    }

    // Adds (i, j) to the basis, pushes theta around the tree cycle and drops
    // the lowest-indexed blocking cell. Returns theta.
    double pivot(std::pair<int, int> entering) {
        const auto [ei, ej] = entering;
        // Tree path from row ei to column ej via BFS parents.
        std::vector<int> parent_cell(m_ + n_, -1), parent_node(m_ + n_, -1);
        std::vector<char> seen(m_ + n_, 0);
        std::deque<int> queue{ei};
        seen[ei] = 1;
        while (!queue.empty()) {
            const int node = queue.front();
            queue.pop_front();
            if (node == m_ + ej) break;
            for (const auto& [other, cell] : adj_[node])
                if (!seen[other]) {
                    seen[other] = 1;
                    parent_cell[other] = cell;
                    parent_node[other] = node;
                    queue.push_back(other);
                }
        }
        std::vector<int> path;  // cells from row ei to column ej
        for (int node = m_ + ej; node != ei; node = parent_node[node]) path.push_back(parent_cell[node]);
        std::reverse(path.begin(), path.end());

        // Odd positions along the path (1st, 3rd, ...) lose theta.
        double theta = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < path.size(); t += 2) {
            const auto [i, j] = basic_[path[t]];
            theta = std::min(theta, flow_(i, j));
        }
        int leaving = -1;
        for (std::size_t t = 0; t < path.size(); t += 2) {
            const auto [i, j] = basic_[path[t]];
            if (flow_(i, j) <= theta) {
                const int key = i * n_ + j;
                if (leaving < 0 || key < basic_[leaving].first * n_ + basic_[leaving].second) leaving = path[t];
            }
        }
        for (std::size_t t = 0; t < path.size(); ++t) {
            const auto [i, j] = basic_[path[t]];
            flow_(i, j) += (t % 2 == 0 ? -theta : theta);
        }
        flow_(ei, ej) = theta;
        const auto [li, lj] = basic_[leaving];
        flow_(li, lj) = 0.0;
        basic_[leaving] = entering;
        return theta;
    }

    void certify() const {
        for (int i = 0; i < m_; ++i)
            for (int j = 0; j < n_; ++j)
                if (reduced(i, j) < -1e3 * eps_) throw Error("transportation simplex failed to certify optimality");
        if (flow_.minCoeff() < -1e-12) throw Error("transportation simplex produced a negative flow");
    }

    Matrix cost_;
    int m_, n_;
    Matrix flow_;
    std::vector<std::pair<int, int>> basic_;
    std::vector<std::vector<std::pair<int, int>>> adj_;
    std::vector<double> row_pot_, col_pot_;
    double eps_ = 0.0;
};

}  // namespace

TransportProblem parallel_problem(const PhaseType& X, const PhaseType& Y, Sense sense) {
    const Descriptors dx = descriptors(X), dy = descriptors(Y);
    return TransportProblem{X.pi(), Y.pi(), dx.m, dy.m, sense, std::sqrt(variance(X)), std::sqrt(variance(Y))};
}

TransportProblem sequential_problem(const PhaseType& X, const PhaseType& Y, Sense sense) {
    const Descriptors dx = descriptors(X), dy = descriptors(Y);
    return TransportProblem{dx.psi, Y.pi(), dx.a_or_zero(), dy.m, sense, std::sqrt(variance(X)),
                            std::sqrt(variance(Y))};
}

double realized_rho(const TransportProblem& p, const Matrix& flow) {
    const double ex = p.row_mass.dot(p.row_value), ey = p.col_mass.dot(p.col_value);
    const double sx = p.row_sd.value_or(ex), sy = p.col_sd.value_or(ey);
    const double exy = p.row_value.dot(flow * p.col_value);
    return (exy - ex * ey) / (sx * sy);
}

Coupling solve_transport(const TransportProblem& p) {
    const Support s = support_of(p);
    auto [u, v] = reduced_masses(p, s);
    const int m = static_cast<int>(s.rows.size()), n = static_cast<int>(s.cols.size());
    const double sign = p.sense == Sense::minimize ? 1.0 : -1.0;
    Matrix cost(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) cost(i, j) = sign * p.row_value(s.rows[i]) * p.col_value(s.cols[j]);

    TransportSimplex simplex(std::move(cost), std::move(u), std::move(v));
    const Matrix& reduced_flow = simplex.run();
    Matrix flow = Matrix::Zero(p.row_mass.size(), p.col_mass.size());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) flow(s.rows[i], s.cols[j]) = reduced_flow(i, j);
    return finish(p, std::move(flow));
}

Coupling monotone_coupling(const TransportProblem& p) {
    Support s = support_of(p);
    std::stable_sort(s.rows.begin(), s.rows.end(),
                     [&](int a, int b) { return p.row_value(a) < p.row_value(b); });
    if (p.sense == Sense::maximize)
        std::stable_sort(s.cols.begin(), s.cols.end(),
                         [&](int a, int b) { return p.col_value(a) < p.col_value(b); });
    else
        std::stable_sort(s.cols.begin(), s.cols.end(),
                         [&](int a, int b) { return p.col_value(a) > p.col_value(b); });
    auto [u, v] = reduced_masses(p, s);
    Matrix sorted_flow;
    north_west(std::move(u), std::move(v), sorted_flow);
    Matrix flow = Matrix::Zero(p.row_mass.size(), p.col_mass.size());
    for (std::size_t i = 0; i < s.rows.size(); ++i)
        for (std::size_t j = 0; j < s.cols.size(); ++j)
            flow(s.rows[i], s.cols[j]) = sorted_flow(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return finish(p, std::move(flow));
}

Coupling target_coupling(const TransportProblem& p, const Coupling& extreme, double rho_target) {
    double weight = 0.0;
    if (rho_target != 0.0) {
        if (extreme.rho == 0.0) throw Infeasible("target correlation beyond the extreme coupling");
        weight = rho_target / extreme.rho;
    }
    if (weight < 0.0 || weight > 1.0 + 1e-12) throw Infeasible("target correlation beyond the extreme coupling");
    weight = std::min(weight, 1.0);
    const Matrix independent = p.row_mass * p.col_mass.transpose();
    return finish(p, weight * extreme.flow + (1.0 - weight) * independent);
}

Matrix to_transfer_matrix(const Matrix& flow, const Vector& psi_X, const Vector& pi_Y) {
    if (flow.rows() != psi_X.size() || flow.cols() != pi_Y.size()) throw Infeasible("flow has the wrong shape");
    Matrix Psi(flow.rows(), flow.cols());
    for (Eigen::Index i = 0; i < flow.rows(); ++i) {
        if (psi_X(i) > mass_floor) {
            Psi.row(i) = flow.row(i) / psi_X(i);
        } else {
            if (flow.row(i).sum() > 1e-12) throw Infeasible("coupling puts mass on a state that is never left");
            Psi.row(i) = pi_Y.transpose();
        }
    }
    return Psi;
}

}  // namespace corrph
