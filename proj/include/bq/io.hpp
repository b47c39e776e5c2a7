#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "bq/analytic_pricing.hpp"
#include "bq/bayes_engine.hpp"
#include "bq/consistency_lab.hpp"
#include "bq/market_sim.hpp"

namespace bq::io {

using nlohmann::json;

// CSV files may start with "# provenance: <json>"; readers skip '#' lines.
inline constexpr const char* kProvenancePrefix = "# provenance: ";

std::string format_double(double x);

void write_series_csv(std::ostream& out, const ObservationSeries& series,
                      const json* provenance = nullptr);
ObservationSeries read_series_csv(std::istream& in);

void write_jumps_csv(std::ostream& out, const JumpRecord& record, const json* provenance = nullptr);
// tau is not a column; it comes from the caller (config or provenance).
JumpRecord read_jumps_csv(std::istream& in, double tau);

void write_convergence_csv(std::ostream& out, const ConvergenceTable& table,
                           const json* provenance = nullptr);
ConvergenceTable read_convergence_csv(std::istream& in);

// Reads the provenance line of a CSV file, if present.
json read_provenance(std::istream& in);

json to_json(const PriceResult& result);
json to_json(const BsParams& params);
json to_json(const MertonTheta& theta);
json posterior_summary(const BsPosterior& post);
json posterior_summary(const MertonPosterior& post);

// (variance, density) rows on `points` log-spaced knots of the scouting range.
void write_bs_density_csv(std::ostream& out, const BsPosterior& post, std::size_t points);
// lambda-marginal (parameter, density) rows; unit prior only.
void write_lambda_density_csv(std::ostream& out, const MertonPosterior& post, std::size_t points);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace bq::io
