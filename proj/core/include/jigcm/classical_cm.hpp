#pragma once

#include <string>
#include <vector>

#include "jigcm/image.hpp"

namespace jigcm {

// Classical dissimilarities for `right` placed immediately right of `left`.
// Lower is more compatible. Other poses are obtained by rotating the inputs.

// Boundary columns read by the classical measures, S x C values each.
struct EdgeColumns {
  std::vector<double> last_col;         // left piece, column S-1
  std::vector<double> second_last_col;  // left piece, column S-2
  std::vector<double> first_col;        // right piece, column 0
  std::vector<double> second_col;       // right piece, column 1
};

EdgeColumns extract_edge_columns(const Piece& left, const Piece& right);

// Sum of squared differences across the shared boundary.
double ssd(const Piece& left, const Piece& right);

// Sum of absolute differences across the shared boundary (asymmetric use).
double l1_cm(const Piece& left, const Piece& right);

// Prediction-based compatibility: linear extrapolation of each side's
// boundary column, scored with (sum |d|^p)^(q/p), p = 3/10, q = 1/16, summed
// over both prediction directions.
double pbc(const Piece& left, const Piece& right);

// Mahalanobis gradient compatibility, both directions summed.
double mgc(const Piece& left, const Piece& right);

enum class ClassicalMeasure { kSsd, kL1, kPbc, kMgc };

ClassicalMeasure classical_measure_from_name(const std::string& name);
double classical_score(ClassicalMeasure m, const Piece& left, const Piece& right);

}  // namespace jigcm
