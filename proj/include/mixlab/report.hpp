// CSV and manifest output.  Every number is printed with round-trip
// precision through a fixed format, so identical runs produce identical
// bytes; no timestamps or machine identifiers appear in any file.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mixlab/inducing.hpp"
#include "mixlab/semiflow.hpp"
#include "mixlab/transfer.hpp"

namespace mixlab::report {

std::string fmt(double x);
std::uint64_t fnv1a(std::string_view s);

void write_rows(const std::filesystem::path& file, const std::string& header,
                const std::vector<std::vector<std::string>>& rows);

void tails_csv(const std::filesystem::path& dir, const std::vector<inducing::TailRow>& tails);
void ratios_csv(const std::filesystem::path& dir, const inducing::RatioReport& rep);
void components_csv(const std::filesystem::path& dir, const inducing::PartitionState& st,
                    const inducing::MarkovReport& mk);
void spectrum_csv(const std::filesystem::path& dir,
                  const std::vector<transfer::EigenData>& rows);
void contraction_csv(const std::filesystem::path& dir,
                     const std::vector<transfer::NormProbe>& probes);
void cone_csv(const std::filesystem::path& dir, const transfer::ConeIteration& it);
void correlation_csv(const std::filesystem::path& dir,
                     const semiflow::CorrelationSeries& cs);
void distortion_csv(const std::filesystem::path& dir,
                    const std::vector<semiflow::DistortionResult>& rows);
void cohomology_csv(const std::filesystem::path& dir,
                    const semiflow::ConsistencyReport& rep);

void write_manifest(const std::filesystem::path& dir, const std::string& serialized);

} // namespace mixlab::report
