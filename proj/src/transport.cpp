#include "tourdesk/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "tourdesk/error.hpp"

namespace tourdesk {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) throw InvalidInput("matrix data does not match its shape");
}

MassDistribution::MassDistribution(std::vector<double> masses) : masses_(std::move(masses)) {
    if (masses_.empty()) throw InvalidInput("mass distribution is empty");
    double total = 0.0;
    for (double m : masses_) {
        if (!std::isfinite(m) || m <= 0.0) throw InvalidInput("masses must be positive and finite");
        total += m;
    }
    if (std::abs(total - 1.0) > kSumTolerance) {
        throw InvalidInput("masses sum to " + std::to_string(total) + ", expected 1");
    }
}

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
// Consecutive degenerate pivots tolerated before falling back to Bland's rule.
constexpr int kDegenerateRunLimit = 32;

struct Cell {
    std::size_t i;
    std::size_t j;
};

class TransportSimplex {
public:
    TransportSimplex(const MassDistribution& a, const MassDistribution& b, const Matrix& cost)
        : n_(a.size()),
          m_(b.size()),
          cost_(cost),
          flow_(n_, m_),
          basic_(n_ * m_, false),
          u_(n_),
          v_(m_) {
        double max_cost = 0.0;
        for (double c : cost.data()) max_cost = std::max(max_cost, c);
        tolerance_ = 1e-12 * std::max(1.0, max_cost);
        north_west_corner(a, b);
    }

    TransportPlan solve() {
        const std::size_t max_iterations = 50 * (n_ + m_) * (n_ + m_) + 1000;
        int degenerate_run = 0;
        bool bland = false;
        for (std::size_t iter = 0; iter < max_iterations; ++iter) {
            compute_potentials();
            const Cell entering = select_entering(bland);
            if (entering.i == kNone) return finish();
            const double theta = pivot(entering, bland);
            if (theta == 0.0) {
                if (++degenerate_run > kDegenerateRunLimit) bland = true;
            } else {
                degenerate_run = 0;
            }
        }
        throw std::logic_error("transportation simplex exceeded its iteration bound");
    }

private:
    std::size_t index(std::size_t i, std::size_t j) const { return i * m_ + j; }

    void north_west_corner(const MassDistribution& a, const MassDistribution& b) {
        std::vector<double> supply = a.masses();
        std::vector<double> demand = b.masses();
        std::size_t i = 0;
        std::size_t j = 0;
        while (true) {
            const double x = std::min(supply[i], demand[j]);
            const bool row_exhausted = supply[i] <= demand[j];
            flow_(i, j) = x;
            basic_[index(i, j)] = true;
            supply[i] -= x;
            demand[j] -= x;
            if (i == n_ - 1 && j == m_ - 1) break;
            if (i == n_ - 1) {
                ++j;
            } else if (j == m_ - 1) {
                ++i;
            } else if (row_exhausted) {
                ++i;
            } else {
                ++j;
            }
        }
    }

    // Builds adjacency of the basis tree. Nodes 0..n-1 are rows, n..n+m-1 columns.
    void build_tree() {
        adjacency_.assign(n_ + m_, {});
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < m_; ++j) {
                if (basic_[index(i, j)]) {
                    adjacency_[i].push_back(n_ + j);
                    adjacency_[n_ + j].push_back(i);
                }
            }
        }
    }

    // u_i + v_j = c_ij on every basic cell, with u_0 = 0.
    void compute_potentials() {
        build_tree();
        std::vector<bool> seen(n_ + m_, false);
        std::vector<std::size_t> queue{0};
        seen[0] = true;
        u_[0] = 0.0;
        for (std::size_t head = 0; head < queue.size(); ++head) {
            const std::size_t node = queue[head];
            for (std::size_t next : adjacency_[node]) {
                if (seen[next]) continue;
                seen[next] = true;
                if (node < n_) {
                    v_[next - n_] = cost_(node, next - n_) - u_[node];
                } else {
                    u_[next] = cost_(next, node - n_) - v_[node - n_];
                }
                queue.push_back(next);
            }
        }
        if (queue.size() != n_ + m_) throw std::logic_error("transportation basis is not a spanning tree");
    }

    Cell select_entering(bool bland) const {
        Cell best{kNone, kNone};
        double best_reduced = -tolerance_;
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < m_; ++j) {
                if (basic_[index(i, j)]) continue;
                const double reduced = cost_(i, j) - u_[i] - v_[j];
                if (reduced < best_reduced) {
                    if (bland) return {i, j};
                    best_reduced = reduced;
                    best = {i, j};
                }
            }
        }
        return best;
    }

    // Path in the basis tree from row `i` to column `j`, as a list of cells.
    std::vector<Cell> tree_path(std::size_t i, std::size_t j) const {
        std::vector<std::size_t> parent(n_ + m_, kNone);
        std::vector<std::size_t> queue{i};
        parent[i] = i;
        const std::size_t goal = n_ + j;
        for (std::size_t head = 0; head < queue.size() && parent[goal] == kNone; ++head) {
            const std::size_t node = queue[head];
            for (std::size_t next : adjacency_[node]) {
                if (parent[next] != kNone) continue;
                parent[next] = node;
                queue.push_back(next);
            }
        }
        std::vector<Cell> path;
        for (std::size_t node = goal; node != i; node = parent[node]) {
            const std::size_t prev = parent[node];
            path.push_back(node >= n_ ? Cell{prev, node - n_} : Cell{node, prev - n_});
        }
        std::reverse(path.begin(), path.end());  // now ordered from row i to column j
        return path;
    }

    // Returns the step length theta.
    double pivot(Cell entering, bool bland) {
        const auto path = tree_path(entering.i, entering.j);
        // Along the path from row i the signs alternate -, +, -, ..., -.
        double theta = std::numeric_limits<double>::infinity();
        std::size_t leaving = kNone;
        for (std::size_t k = 0; k < path.size(); k += 2) {
            const double x = flow_(path[k].i, path[k].j);
            const bool better = x < theta ||
                                (x == theta && bland && index(path[k].i, path[k].j) <
                                                            index(path[leaving].i, path[leaving].j));
            if (better) {
                theta = x;
                leaving = k;
            }
        }
        for (std::size_t k = 0; k < path.size(); ++k) {
            double& x = flow_(path[k].i, path[k].j);
            x += (k % 2 == 0) ? -theta : theta;
        }
        const Cell out = path[leaving];
        flow_(out.i, out.j) = 0.0;
        basic_[index(out.i, out.j)] = false;
        basic_[index(entering.i, entering.j)] = true;
        flow_(entering.i, entering.j) = theta;
        return theta;
    }

    TransportPlan finish() const {
        TransportPlan result{flow_, 0.0};
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < m_; ++j) result.value += flow_(i, j) * cost_(i, j);
        }
        return result;
    }

    std::size_t n_;
    std::size_t m_;
    const Matrix& cost_;
    Matrix flow_;
    std::vector<bool> basic_;
    std::vector<double> u_;
    std::vector<double> v_;
    std::vector<std::vector<std::size_t>> adjacency_;
    double tolerance_ = 0.0;
};

}  // namespace

TransportPlan solve_ot(const MassDistribution& source, const MassDistribution& target, const Matrix& cost) {
    if (cost.rows() != source.size() || cost.cols() != target.size()) {
        throw InvalidInput("cost matrix is " + std::to_string(cost.rows()) + "x" + std::to_string(cost.cols()) +
                           ", marginals are " + std::to_string(source.size()) + " and " +
                           std::to_string(target.size()));
    }
    for (double c : cost.data()) {
        if (!std::isfinite(c)) throw InvalidInput("cost matrix has a non-finite entry");
        if (c < 0.0) throw InvalidInput("cost matrix has a negative entry");
    }
    return TransportSimplex(source, target, cost).solve();
}

}  // namespace tourdesk
