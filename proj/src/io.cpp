#include "bq/io.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "bq/errors.hpp"

namespace bq::io {

namespace {

void write_provenance(std::ostream& out, const json* provenance) {
    if (provenance != nullptr) out << kProvenancePrefix << provenance->dump() << '\n';
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_double(const std::string& s, std::size_t line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(ErrorKind::io, "line " + std::to_string(line_no) + ": not a number: '" + s + "'");
    }
}

// Reads the data rows of a CSV with the given header; '#' lines are skipped.
std::vector<std::vector<double>> read_table(std::istream& in, const std::string& header) {
    std::string line;
    std::size_t line_no = 0;
    bool seen_header = false;
    std::vector<std::vector<double>> rows;
    const std::size_t cols = split_csv(header).size();
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        if (!seen_header) {
            require(line == header, ErrorKind::io,
                    "expected CSV header '" + header + "', found '" + line + "'");
            seen_header = true;
            continue;
        }
        const auto cells = split_csv(line);
        require(cells.size() == cols, ErrorKind::io,
                "line " + std::to_string(line_no) + ": expected " + std::to_string(cols) +
                    " columns");
        std::vector<double> row;
        for (const auto& c : cells) row.push_back(parse_double(c, line_no));
        rows.push_back(std::move(row));
    }
    require(seen_header, ErrorKind::io, "missing CSV header '" + header + "'");
    return rows;
}

}  // namespace

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_series_csv(std::ostream& out, const ObservationSeries& series, const json* provenance) {
    write_provenance(out, provenance);
    out << "time,quote\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        out << format_double(series.times[i]) << ',' << format_double(series.quotes[i]) << '\n';
    }
}

ObservationSeries read_series_csv(std::istream& in) {
    ObservationSeries s;
    for (const auto& row : read_table(in, "time,quote")) {
        s.times.push_back(row[0]);
        s.quotes.push_back(row[1]);
    }
    s.validate();
    return s;
}

void write_jumps_csv(std::ostream& out, const JumpRecord& record, const json* provenance) {
    write_provenance(out, provenance);
    out << "time,jump_size\n";
    for (std::size_t i = 0; i < record.count(); ++i) {
        out << format_double(record.jump_times[i]) << ',' << format_double(record.jump_sizes[i])
            << '\n';
    }
}

JumpRecord read_jumps_csv(std::istream& in, double tau) {
    JumpRecord r;
    r.tau = tau;
    for (const auto& row : read_table(in, "time,jump_size")) {
        r.jump_times.push_back(row[0]);
        r.jump_sizes.push_back(row[1]);
    }
    r.validate();
    return r;
}

void write_convergence_csv(std::ostream& out, const ConvergenceTable& table,
                           const json* provenance) {
    write_provenance(out, provenance);
    out << "index,subjective,reference,rel_diff,err\n";
    for (const auto& r : table.rows) {
        out << format_double(r.index) << ',' << format_double(r.subjective) << ','
            << format_double(r.reference) << ',' << format_double(r.rel_diff) << ','
            << format_double(r.err) << '\n';
    }
}

ConvergenceTable read_convergence_csv(std::istream& in) {
    ConvergenceTable t;
    for (const auto& row : read_table(in, "index,subjective,reference,rel_diff,err")) {
        ConvergenceRow r;
        r.index = row[0];
        r.subjective = row[1];
        r.reference = row[2];
        r.rel_diff = row[3];
        r.err = row[4];
        t.rows.push_back(r);
    }
    t.validate();
    return t;
}

json read_provenance(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) return json();
    const std::string prefix = kProvenancePrefix;
    if (line.rfind(prefix, 0) != 0) return json();
    try {
        return json::parse(line.substr(prefix.size()));
    } catch (const json::exception& e) {
        fail(ErrorKind::io, std::string("malformed provenance line: ") + e.what());
    }
}

json to_json(const PriceResult& result) {
    json j;
    j["value"] = result.value;
    j["abs_error_estimate"] = result.abs_error_estimate;
    j["method"] = to_string(result.method);
    json d = json::object();
    for (const auto& [k, v] : result.diagnostics) d[k] = v;
    j["diagnostics"] = d;
    return j;
}

json to_json(const BsParams& params) {
    return json{{"s0", params.s0}, {"rho", params.rho}, {"sigma", params.sigma}};
}

json to_json(const MertonTheta& theta) {
    return json{{"lambda", theta.lambda}, {"delta_sq", theta.delta_sq}, {"m", theta.m}};
}

json posterior_summary(const BsPosterior& post) {
    json j;
    j["model"] = "bs";
    j["n"] = post.n();
    j["sigma_hat_sq"] = post.sigma_hat_sq();
    j["prior"] = to_string(post.prior().kind);
    j["prior_note"] = post.prior().support_note;
    j["log_norm"] = post.log_norm();
    j["norm_rel_error"] = post.norm_rel_error();
    const auto mean = post.expectation([](double v) { return v; }, 1e-8 * post.sigma_hat_sq());
    j["posterior_mean_variance"] = mean.converged ? json(mean.ratio) : json(nullptr);
    return j;
}

json posterior_summary(const MertonPosterior& post) {
    json j;
    j["model"] = "merton";
    j["n_jumps"] = post.n_jumps();
    j["tau"] = post.tau();
    j["lambda_hat"] = post.lambda_hat();
    j["m_hat"] = post.m_hat();
    j["delta_hat_sq"] = post.delta_hat_sq();
    j["prior"] = to_string(post.prior().kind);
    j["prior_note"] = post.prior().support_note;
    j["log_norm"] = post.log_norm();
    return j;
}

void write_bs_density_csv(std::ostream& out, const BsPosterior& post, std::size_t points) {
    require(points >= 2, ErrorKind::invalid_input, "need at least 2 density points");
    const auto b = post.scout_bracket();
    out << "variance,density\n";
    for (std::size_t i = 0; i < points; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(points - 1);
        const double v = b.lo * std::pow(b.hi / b.lo, u);
        out << format_double(v) << ',' << format_double(post.density(v)) << '\n';
    }
}

void write_lambda_density_csv(std::ostream& out, const MertonPosterior& post, std::size_t points) {
    require(points >= 2, ErrorKind::invalid_input, "need at least 2 density points");
    const double shape = static_cast<double>(post.n_jumps()) + 1.0;
    const double lo = boost::math::gamma_p_inv(shape, 1e-8) / post.tau();
    const double hi = boost::math::gamma_p_inv(shape, 1.0 - 1e-8) / post.tau();
    out << "lambda,density\n";
    for (std::size_t i = 0; i < points; ++i) {
        const double lam = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
        out << format_double(lam) << ',' << format_double(post.lambda_marginal_density(lam)) << '\n';
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        require(!ec, ErrorKind::io, "cannot create directory " + path.parent_path().string());
    }
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::io, "cannot open " + path.string() + " for writing");
    out << content;
    out.close();
    require(static_cast<bool>(out), ErrorKind::io, "write to " + path.string() + " failed");
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace bq::io
