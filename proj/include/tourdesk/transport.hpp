#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tourdesk {

// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
    const std::vector<double>& data() const noexcept { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Positive masses summing to one.
class MassDistribution {
public:
    static constexpr double kSumTolerance = 1e-12;

    // Throws InvalidInput unless every mass is positive and finite and the
    // total is within kSumTolerance of one.
    explicit MassDistribution(std::vector<double> masses);

    std::size_t size() const noexcept { return masses_.size(); }
    double operator[](std::size_t i) const { return masses_[i]; }
    const std::vector<double>& masses() const noexcept { return masses_; }

private:
    std::vector<double> masses_;
};

struct TransportPlan {
    Matrix plan;
    double value = 0.0;
};

// Exact transportation simplex. Starts from the north-west corner basis,
// prices with row/column potentials and pivots on the most negative reduced
// cost, switching to Bland's rule after a run of degenerate pivots so the
// method cannot cycle. The returned plan is an optimal basic feasible
// solution: at most n + m - 1 nonzero cells forming a spanning forest.
//
// Throws InvalidInput when the cost shape does not match the marginals or
// any cost entry is negative or not finite.
TransportPlan solve_ot(const MassDistribution& source, const MassDistribution& target, const Matrix& cost);

}  // namespace tourdesk
