#pragma once

#include <stdexcept>
#include <string>

namespace enkf {

struct NotPositiveDefinite : std::runtime_error {
    explicit NotPositiveDefinite(const std::string& what) : std::runtime_error(what) {}
};

struct IndefiniteMatrix : std::runtime_error {
    explicit IndefiniteMatrix(const std::string& what) : std::runtime_error(what) {}
};

struct RankDeficient : std::runtime_error {
    explicit RankDeficient(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionMismatch : std::runtime_error {
    explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct NonDiagonalR : std::runtime_error {
    explicit NonDiagonalR(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateEnsemble : std::runtime_error {
    explicit DegenerateEnsemble(const std::string& what) : std::runtime_error(what) {}
};

struct MassLeak : std::runtime_error {
    explicit MassLeak(const std::string& what) : std::runtime_error(what) {}
};

struct ZeroLikelihood : std::runtime_error {
    explicit ZeroLikelihood(const std::string& what) : std::runtime_error(what) {}
};

struct DivergenceDetected : std::runtime_error {
    explicit DivergenceDetected(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace enkf
