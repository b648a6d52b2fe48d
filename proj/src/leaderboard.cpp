#include "depthbench/leaderboard.hpp"

#include "depthbench/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace depthbench {

void ScoringConfig::validate() const {
    if (!(c > 0.0) || !std::isfinite(c)) {
        throw Error(ErrorCode::InvalidArgument, "normalization constant must be positive");
    }
    if (!(exponent_coefficient > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "exponent coefficient must be positive");
    }
}

double final_score(double si_rmse, double runtime_s, const ScoringConfig& config) {
    if (!(runtime_s > 0.0)) {
        throw Error(ErrorCode::NonPositiveRuntime, "runtime must be positive, got " + std::to_string(runtime_s));
    }
    if (si_rmse < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "si-RMSE must be non-negative");
    }
    config.validate();
    return std::exp2(-config.exponent_coefficient * si_rmse) / (config.c * runtime_s);
}

double implied_normalization(double si_rmse, double runtime_s, double published_score,
                             double exponent_coefficient) {
    if (!(runtime_s > 0.0)) {
        throw Error(ErrorCode::NonPositiveRuntime, "runtime must be positive");
    }
    if (!(published_score > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "published score must be positive");
    }
    return std::exp2(-exponent_coefficient * si_rmse) / (published_score * runtime_s);
}

NormalizationFit fit_normalization_constant(std::span<const SubmissionRecord> records,
                                            double exponent_coefficient) {
    NormalizationFit fit;
    for (const auto& r : records) {
        if (r.published_score) {
            fit.rows.push_back({r.team, implied_normalization(r.si_rmse, r.runtime_s, *r.published_score,
                                                              exponent_coefficient)});
        }
    }
    if (fit.rows.empty()) {
        throw Error(ErrorCode::EmptyInput, "no records with a published score");
    }

    // Outliers are judged against the median so a single bad row cannot drag
    // the reference.
    std::vector<double> sorted;
    for (const auto& row : fit.rows) sorted.push_back(row.implied_c);
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    const double median = sorted.size() % 2 == 1 ? sorted[mid] : std::sqrt(sorted[mid - 1] * sorted[mid]);

    double log_sum = 0.0;
    for (auto& row : fit.rows) {
        const double factor = row.implied_c / median;
        row.outlier = factor > kOutlierFactor || factor < 1.0 / kOutlierFactor;
        if (!row.outlier) {
            log_sum += std::log(row.implied_c);
            ++fit.inliers;
        }
    }
    fit.c = std::exp(log_sum / static_cast<double>(fit.inliers));
    for (auto& row : fit.rows) {
        row.ratio = row.implied_c / fit.c;
        if (!row.outlier) {
            fit.max_relative_deviation = std::max(fit.max_relative_deviation, std::abs(row.ratio - 1.0));
        }
    }
    return fit;
}

std::vector<LeaderboardRow> rank(std::span<const SubmissionRecord> records, const ScoringConfig& config) {
    if (records.empty()) {
        throw Error(ErrorCode::EmptyInput, "no records to rank");
    }
    std::vector<LeaderboardRow> rows;
    rows.reserve(records.size());
    for (const auto& r : records) {
        rows.push_back({r, final_score(r.si_rmse, r.runtime_s, config), 0});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const LeaderboardRow& a, const LeaderboardRow& b) {
        if (a.final_score != b.final_score) return a.final_score > b.final_score;
        if (a.record.runtime_s != b.record.runtime_s) return a.record.runtime_s < b.record.runtime_s;
        return a.record.team < b.record.team;
    });
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].rank = i + 1;
    }
    return rows;
}

std::optional<ReportFormat> parse_report_format(const std::string& name) {
    if (name == "text") return ReportFormat::Text;
    if (name == "csv") return ReportFormat::Csv;
    if (name == "json") return ReportFormat::Json;
    return std::nullopt;
}

namespace {

std::string shortest(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::string render_text(std::span<const LeaderboardRow> rows) {
    const std::vector<std::string> header = {"Rank", "Team", "Model Size, MB", "si-RMSE", "RMSE",
                                             "LOG10", "REL", "Runtime, ms", "Final Score"};
    std::vector<std::vector<std::string>> cells;
    for (const auto& row : rows) {
        const auto& r = row.record;
        cells.push_back({std::to_string(row.rank), r.team, fixed(r.model_size_mb, 1), fixed(r.si_rmse, 4),
                         fixed(r.rmse, 2), fixed(r.log10, 4), fixed(r.rel, 4), fixed(r.runtime_s * 1000.0, 0),
                         fixed(row.final_score, 2)});
    }
    std::vector<std::size_t> widths(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        widths[c] = header[c].size();
        for (const auto& line : cells) widths[c] = std::max(widths[c], line[c].size());
    }
    std::ostringstream out;
    const auto emit = [&](const std::vector<std::string>& line) {
        for (std::size_t c = 0; c < line.size(); ++c) {
            if (c > 0) out << "  ";
            // Team left-aligned, numbers right-aligned.
            const std::size_t pad = widths[c] - line[c].size();
            if (c == 1) {
                out << line[c] << std::string(pad, ' ');
            } else {
                out << std::string(pad, ' ') << line[c];
            }
        }
        out << "\n";
    };
    emit(header);
    for (const auto& line : cells) emit(line);
    return out.str();
}

std::string render_csv(std::span<const LeaderboardRow> rows) {
    std::ostringstream out;
    out << "rank,team,model_size_mb,si_rmse,rmse,log10,rel,runtime_s,final_score,published_score\n";
    for (const auto& row : rows) {
        const auto& r = row.record;
        out << row.rank << ',' << csv_field(r.team) << ',' << shortest(r.model_size_mb) << ','
            << shortest(r.si_rmse) << ',' << shortest(r.rmse) << ',' << shortest(r.log10) << ','
            << shortest(r.rel) << ',' << shortest(r.runtime_s) << ',' << shortest(row.final_score) << ','
            << (r.published_score ? shortest(*r.published_score) : std::string()) << "\n";
    }
    return out.str();
}

std::string render_json(std::span<const LeaderboardRow> rows) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
        const auto& r = row.record;
        nlohmann::ordered_json j;
        j["rank"] = row.rank;
        j["team"] = r.team;
        j["model_size_mb"] = r.model_size_mb;
        j["si_rmse"] = r.si_rmse;
        j["rmse"] = r.rmse;
        j["log10"] = r.log10;
        j["rel"] = r.rel;
        j["runtime_s"] = r.runtime_s;
        j["final_score"] = row.final_score;
        if (r.published_score) j["published_score"] = *r.published_score;
        arr.push_back(std::move(j));
    }
    nlohmann::ordered_json doc;
    doc["rows"] = std::move(arr);
    return doc.dump(2) + "\n";
}

SubmissionRecord record_from_json(const nlohmann::json& j) {
    SubmissionRecord r;
    r.team = j.at("team").get<std::string>();
    r.si_rmse = j.at("si_rmse").get<double>();
    r.rmse = j.value("rmse", 0.0);
    r.log10 = j.value("log10", 0.0);
    r.rel = j.value("rel", 0.0);
    if (j.contains("runtime_s")) {
        r.runtime_s = j.at("runtime_s").get<double>();
    } else if (j.contains("runtime_ms")) {
        r.runtime_s = j.at("runtime_ms").get<double>() / 1000.0;
    } else {
        throw Error(ErrorCode::InvalidArgument, "record \"" + r.team + "\" has no runtime_s / runtime_ms");
    }
    r.model_size_mb = j.value("model_size_mb", 0.0);
    if (j.contains("score")) {
        r.published_score = j.at("score").get<double>();
    } else if (j.contains("published_score")) {
        r.published_score = j.at("published_score").get<double>();
    }
    return r;
}

} // namespace

std::string render_report(std::span<const LeaderboardRow> rows, ReportFormat format) {
    switch (format) {
    case ReportFormat::Text: return render_text(rows);
    case ReportFormat::Csv: return render_csv(rows);
    case ReportFormat::Json: return render_json(rows);
    }
    return {};
}

std::vector<LeaderboardRow> parse_report_json(const std::string& text) {
    const auto doc = nlohmann::json::parse(text);
    std::vector<LeaderboardRow> rows;
    for (const auto& j : doc.at("rows")) {
        LeaderboardRow row;
        row.record = record_from_json(j);
        row.final_score = j.at("final_score").get<double>();
        row.rank = j.at("rank").get<std::size_t>();
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<SubmissionRecord> parse_results_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::InvalidArgument, e.what());
    }
    const nlohmann::json& list = doc.is_object() ? doc.at("records") : doc;
    if (!list.is_array()) {
        throw Error(ErrorCode::InvalidArgument, "expected an array of records");
    }
    std::vector<SubmissionRecord> records;
    try {
        for (const auto& j : list) {
            records.push_back(record_from_json(j));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, e.what());
    }
    return records;
}

std::vector<SubmissionRecord> published_challenge_results() {
    // team, si-RMSE, RMSE, LOG10, REL, runtime (s), model size (MB), printed score
    return {
        {"Tencent GY-Lab", 0.2836, 3.56, 0.1121, 0.2690, 0.097, 3.4, 129.41},
        {"SMART", 0.2602, 3.25, 0.1043, 0.2678, 1.197, 15.0, 14.51},
        {"Airia-Team1", 0.2408, 3.00, 0.0904, 0.2389, 1.933, 64.9, 11.75},
        {"YTL", 0.2902, 3.91, 0.1551, 0.4700, 1.275, 56.2, 8.98},
        {"CFL2", 0.2761, 9.68, 2.3393, 0.9951, 0.772, 9.6, 5.5},
        {"HIT-AIIA", 0.2332, 2.72, 0.0831, 0.2189, 6.146, 56.0, 4.11},
        {"weichi", 0.4659, 7.56, 0.4493, 0.5992, 0.582, 0.5, 1.72},
        {"MonoVision Palace", 0.3543, 4.16, 0.1441, 0.3862, 3.466, 15.3, 1.36},
        {"3dv oppo", 0.2678, 5.96, 0.3300, 0.5152, 26.494, 187.0, 0.59},
        {"MegaUe", 0.3737, 9.08, 0.9605, 0.8573, 9.392, 118.0, 0.38},
    };
}

} // namespace depthbench
