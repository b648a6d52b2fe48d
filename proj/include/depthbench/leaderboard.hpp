#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace depthbench {

/// Normalization constant reconstructed from the published challenge results
/// (winner row: si-RMSE 0.2836, 97 ms, score 129.41) with runtime in seconds.
inline constexpr double kFittedNormalization = 1.5624937654231928e-3;
inline constexpr double kScoreExponentCoefficient = 20.0;

struct ScoringConfig {
    double exponent_coefficient = kScoreExponentCoefficient;
    double c = kFittedNormalization;  // per second

    void validate() const;
};

struct SubmissionRecord {
    std::string team;
    double si_rmse = 0.0;
    double rmse = 0.0;
    double log10 = 0.0;
    double rel = 0.0;
    double runtime_s = 0.0;
    double model_size_mb = 0.0;
    std::optional<double> published_score;
};

struct LeaderboardRow {
    SubmissionRecord record;
    double final_score = 0.0;
    std::size_t rank = 0;
};

/// 2^(-coef * si_rmse) / (C * runtime_s). Throws Error(NonPositiveRuntime).
double final_score(double si_rmse, double runtime_s, const ScoringConfig& config = {});

/// C implied by one published row: 2^(-coef * si) / (score * runtime).
double implied_normalization(double si_rmse, double runtime_s, double published_score,
                             double exponent_coefficient = kScoreExponentCoefficient);

struct ImpliedConstant {
    std::string team;
    double implied_c = 0.0;
    double ratio = 0.0;  // implied_c / fitted c
    bool outlier = false;
};

struct NormalizationFit {
    double c = 0.0;                      // geometric mean over inlier rows
    double max_relative_deviation = 0.0; // over inlier rows, |C_i / c - 1|
    std::vector<ImpliedConstant> rows;
    std::size_t inliers = 0;
};

/// Rows whose implied C differs from the median by more than this factor are
/// reported as outliers and excluded from the fit.
inline constexpr double kOutlierFactor = 2.0;

/// Uses every record with a published score. Throws Error(EmptyInput).
NormalizationFit fit_normalization_constant(std::span<const SubmissionRecord> records,
                                            double exponent_coefficient = kScoreExponentCoefficient);

/// Scores and sorts descending; ties go to the lower runtime, then team name.
std::vector<LeaderboardRow> rank(std::span<const SubmissionRecord> records, const ScoringConfig& config = {});

enum class ReportFormat { Text, Csv, Json };

std::optional<ReportFormat> parse_report_format(const std::string& name);

/// Text is an aligned table (si-RMSE 4 decimals, score 2 decimals). CSV and
/// JSON carry full round-trip precision.
std::string render_report(std::span<const LeaderboardRow> rows, ReportFormat format);

/// Parses the JSON form written by render_report.
std::vector<LeaderboardRow> parse_report_json(const std::string& text);

/// Results file: a JSON array of records, or an object with a "records" array.
/// Keys: team, si_rmse, rmse, log10, rel, runtime_s (or runtime_ms),
/// model_size_mb, optional score.
std::vector<SubmissionRecord> parse_results_json(const std::string& text);

/// The ten rows of the published challenge leaderboard, in printed order.
std::vector<SubmissionRecord> published_challenge_results();

/// Team whose printed score cannot be reconciled with the scoring formula.
inline constexpr const char* kKnownInconsistentTeam = "CFL2";

} // namespace depthbench
