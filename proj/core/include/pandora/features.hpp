#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pandora/graph.hpp"
#include "pandora/matrix.hpp"
#include "pandora/motifs.hpp"

#include <json.hpp>

namespace pandora {

// ---------------------------------------------------------------------------
// Chi2 discretization

/// Pearson χ² over an m×k contingency table (rows = intervals, cols =
/// classes). Cells whose expected count is zero contribute nothing.
/// Throws std::invalid_argument if every cell is zero.
double chi2_statistic(const DenseMatrix& table);

struct Chi2Config {
  /// Significance levels tried in order; merging continues while the
  /// inconsistency rate stays within the limit.
  std::vector<double> sig_levels = {0.5, 0.1, 0.05, 0.01, 0.005, 0.001};
  double inconsistency_limit = 0.05;
  std::size_t max_bins = 10;
};

/// Ordered cut points for one attribute. Bin i covers [cut[i-1], cut[i]);
/// the first bin is unbounded below and the last unbounded above.
struct DiscretizationScheme {
  std::string attribute;
  std::vector<double> cut_points;
  /// Fewer than two distinct training values; the scheme has a single bin.
  bool degenerate = false;
  /// The max-bin cap forced merges past the inconsistency limit.
  bool capped = false;
  /// Inconsistency rate of the training data under this scheme alone.
  double inconsistency = 0.0;

  std::size_t bin_count() const noexcept { return cut_points.size() + 1; }
  std::size_t bin_of(double value) const;
};

/// Single-attribute Chi2.
DiscretizationScheme chi2_discretize(std::span<const double> values,
                                     std::span<const int> labels, const Chi2Config& config = {},
                                     std::string attribute = {});

/// Chi2 over several attributes at once. The inconsistency rate is measured
/// on the joint bin pattern, so one attribute's coarseness can be
/// compensated by another's.
std::vector<DiscretizationScheme> chi2_discretize_all(
    std::span<const std::vector<double>> columns, std::span<const std::string> names,
    std::span<const int> labels, const Chi2Config& config = {});

/// Fraction of samples not in the majority class of their joint bin pattern.
double inconsistency_rate(std::span<const DiscretizationScheme> schemes,
                          std::span<const std::vector<double>> columns,
                          std::span<const int> labels);

/// {"attribute": [cut, ...], ...}
/// Key order follows scheme order.
nlohmann::ordered_json schemes_to_json(std::span<const DiscretizationScheme> schemes);
std::vector<DiscretizationScheme> schemes_from_json(const nlohmann::ordered_json& j);

// ---------------------------------------------------------------------------
// Box-Cox

struct BoxCoxResult {
  std::vector<double> values;
  double lambda = 1.0;
};

/// (x^λ − 1)/λ, or ln x at λ = 0. Rejects non-positive inputs.
std::vector<double> boxcox_transform(std::span<const double> values, double lambda);
/// Profile log-likelihood of λ for the given positive sample.
double boxcox_log_likelihood(std::span<const double> values, double lambda);
/// Chooses λ on the grid −5, −4.99, …, 5 by maximum likelihood.
BoxCoxResult boxcox(std::span<const double> values);
/// x − min(x) + 1 when any value is ≤ 0, otherwise the input unchanged.
std::vector<double> shift_positive(std::span<const double> values);

// ---------------------------------------------------------------------------
// Tensors

std::vector<double> one_hot(std::size_t category, std::size_t classes);

enum class FeatureRole { AFT, SFT };

struct FeatureTensor {
  DenseMatrix values;
  FeatureRole role = FeatureRole::AFT;
  std::vector<std::string> column_names;
};

/// Raw per-node attributes keyed by column name. NaN marks a missing value.
struct AttributeTable {
  std::vector<std::string> node_ids;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  std::size_t node_count() const noexcept { return node_ids.size(); }
  const std::vector<double>& column(const std::string& name) const;
};

/// Attribute columns in AFT block order: demo, med (two columns), geo-clim,
/// eco, mobility.
const std::vector<std::string>& default_attribute_names();
/// Family of a known attribute column ("demo", "med", "geo_clim", "eco",
/// "mobility"); throws for unknown names.
std::string attribute_family(const std::string& attribute);

/// Concatenated one-hot blocks, one block per scheme, in scheme order.
FeatureTensor build_aft(const AttributeTable& raw, std::span<const DiscretizationScheme> schemes);

/// Columns: degree, flight_degree, transport_freq, mt31..mt43, each divided
/// by its column maximum (all-zero columns stay zero).
FeatureTensor build_sft(const Graph& g, const NmdTable& nmd, std::span<const double> transport_freq);

}  // namespace pandora
