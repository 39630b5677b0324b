#pragma once

// File formats: measure files, bidiagonal operator band files, trajectory
// CSVs, and dataset ingestion (CSV, raw binary, IDX). Writers emit doubles
// with 17 significant digits so every read(write(x)) round-trips bitwise.

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "plopt/engine.hpp"
#include "plopt/measure.hpp"
#include "plopt/util.hpp"

namespace plopt::io {

namespace detail {

// Shortest exact decimal form, for header metadata (data lines use %.16e).
inline std::string shortest(double x) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view tok, const std::string& where) {
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw data_error(where + ": bad number '" + std::string(tok) + "'");
    return v;
}

inline long long parse_int(std::string_view tok, const std::string& where) {
    long long v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw data_error(where + ": bad integer '" + std::string(tok) + "'");
    return v;
}

inline std::optional<double> parse_optional(std::string_view tok, const std::string& where) {
    if (tok == "na") return std::nullopt;
    return parse_double(tok, where);
}

inline std::vector<std::string_view> split(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

// key=value field with a fixed expected key, as used by the text headers.
inline std::string_view expect_field(std::string_view tok, std::string_view key,
                                     const std::string& where) {
    if (tok.size() < key.size() + 1 || tok.substr(0, key.size()) != key || tok[key.size()] != '=')
        throw data_error(where + ": expected '" + std::string(key) + "=...', got '" +
                         std::string(tok) + "'");
    return tok.substr(key.size() + 1);
}

inline bool get_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

} // namespace detail

// --- measure files -----------------------------------------------------------
//
//   atoms=<K> zeta=<z|na> nu=<v|na>
//   <lambda_1> <mass_1>          (decreasing lambda, scientific notation)
//   ...

inline void write_measure(std::ostream& out, const spectrum::DiscreteMeasure& m) {
    out << "atoms=" << m.size();
    out << " zeta=" << (m.meta.zeta ? detail::shortest(*m.meta.zeta) : "na");
    out << " nu=" << (m.meta.nu ? detail::shortest(*m.meta.nu) : "na");
    out << '\n';
    for (std::size_t k = 0; k < m.size(); ++k)
        out << format_g17(m.atoms[k]) << ' ' << format_g17(m.masses[k]) << '\n';
    if (!out) throw io_error("write_measure: stream failure");
}

inline spectrum::DiscreteMeasure read_measure(std::istream& in) {
    std::string line;
    if (!detail::get_line(in, line)) throw data_error("read_measure: empty input");
    const auto fields = detail::split(detail::trim(line), ' ');
    if (fields.size() != 3) throw data_error("read_measure: malformed header '" + line + "'");
    const auto count = detail::parse_int(detail::expect_field(fields[0], "atoms", "read_measure"),
                                         "read_measure");
    if (count < 1) throw data_error("read_measure: atom count must be positive");
    spectrum::MeasureMeta meta;
    meta.zeta = detail::parse_optional(detail::expect_field(fields[1], "zeta", "read_measure"),
                                       "read_measure");
    meta.nu = detail::parse_optional(detail::expect_field(fields[2], "nu", "read_measure"),
                                     "read_measure");

    std::vector<double> atoms, masses;
    atoms.reserve(static_cast<std::size_t>(count));
    masses.reserve(static_cast<std::size_t>(count));
    while (detail::get_line(in, line)) {
        const auto row = detail::trim(line);
        if (row.empty()) continue;
        const auto toks = detail::split(row, ' ');
        if (toks.size() != 2) throw data_error("read_measure: malformed atom line '" + line + "'");
        atoms.push_back(detail::parse_double(toks[0], "read_measure"));
        masses.push_back(detail::parse_double(toks[1], "read_measure"));
    }
    if (atoms.size() != static_cast<std::size_t>(count))
        throw data_error("read_measure: header promises " + std::to_string(count) + " atoms, file has " +
                         std::to_string(atoms.size()));
    // make_measure enforces positive, strictly decreasing atoms and finite
    // nonnegative masses, throwing data_error on violations.
    return spectrum::make_measure(std::move(atoms), std::move(masses), meta);
}

// --- operator band files -------------------------------------------------------
//
//   band dim=<N> zeta=<z|na> nu=<v|na>
//   <diag_i> <subdiag_below_i> <target_i>   (N lines; first subdiagonal slot is 0)

inline void write_operator(std::ostream& out, const spectrum::OperatorProblem& op) {
    if (!op.bidiagonal)
        throw parameter_error("write_operator: only bidiagonal operators have a band file form");
    out << "band dim=" << op.dim();
    out << " zeta=" << (op.zeta ? detail::shortest(*op.zeta) : "na");
    out << " nu=" << (op.nu ? detail::shortest(*op.nu) : "na");
    out << '\n';
    for (Eigen::Index i = 0; i < op.dim(); ++i)
        out << format_g17(op.diag[i]) << ' ' << format_g17(i == 0 ? 0.0 : op.sub[i - 1]) << ' '
            << format_g17(op.target[i]) << '\n';
    if (!out) throw io_error("write_operator: stream failure");
}

inline spectrum::OperatorProblem read_operator(std::istream& in) {
    std::string line;
    if (!detail::get_line(in, line)) throw data_error("read_operator: empty input");
    const auto fields = detail::split(detail::trim(line), ' ');
    if (fields.size() != 4 || fields[0] != "band")
        throw data_error("read_operator: malformed header '" + line + "'");
    const auto dim =
        detail::parse_int(detail::expect_field(fields[1], "dim", "read_operator"), "read_operator");
    if (dim < 2) throw data_error("read_operator: dim must be at least 2");
    spectrum::OperatorProblem op;
    op.bidiagonal = true;
    op.zeta = detail::parse_optional(detail::expect_field(fields[2], "zeta", "read_operator"),
                                     "read_operator");
    op.nu = detail::parse_optional(detail::expect_field(fields[3], "nu", "read_operator"),
                                   "read_operator");
    op.diag.resize(dim);
    op.sub.resize(dim - 1);
    op.target.resize(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        if (!detail::get_line(in, line))
            throw data_error("read_operator: truncated at row " + std::to_string(i));
        const auto toks = detail::split(detail::trim(line), ' ');
        if (toks.size() != 3) throw data_error("read_operator: malformed row '" + line + "'");
        op.diag[i] = detail::parse_double(toks[0], "read_operator");
        const double sub = detail::parse_double(toks[1], "read_operator");
        if (i == 0) {
            if (sub != 0.0) throw data_error("read_operator: first subdiagonal slot must be 0");
        } else {
            op.sub[i - 1] = sub;
        }
        op.target[i] = detail::parse_double(toks[2], "read_operator");
    }
    while (detail::get_line(in, line))
        if (!detail::trim(line).empty()) throw data_error("read_operator: trailing content");
    return op;
}

// --- trajectory CSV ------------------------------------------------------------
//
//   # schedule=<name>
//   # loss0=<value>
//   # note=<text>                  (zero or more)
//   step,loss,alpha,beta[,p_at_<lambda>...]
//   <n>,<loss>,<alpha>,<beta>[,<p>...]
//   ...
//   # diverged at step <n>         (trailing marker, only on divergence)

inline void write_trajectory(std::ostream& out, const engine::Trajectory& t) {
    out << "# schedule=" << t.schedule_name << '\n';
    out << "# loss0=" << format_g17(t.loss0) << '\n';
    for (const auto& note : t.notes) out << "# note=" << note << '\n';
    out << "step,loss,alpha,beta";
    for (double lam : t.probe_lambdas) out << ",p_at_" << format_g17(lam);
    out << '\n';
    const bool with_probes = !t.probe_lambdas.empty();
    for (std::size_t i = 0; i < t.records.size(); ++i) {
        const auto& r = t.records[i];
        out << r.n << ',' << format_g17(r.loss) << ',' << format_g17(r.alpha) << ','
            << format_g17(r.beta);
        if (with_probes)
            for (double p : t.probe_values[i]) out << ',' << format_g17(p);
        out << '\n';
    }
    if (t.diverged) out << "# diverged at step " << t.diverged_at << '\n';
    if (!out) throw io_error("write_trajectory: stream failure");
}

inline engine::Trajectory read_trajectory(std::istream& in) {
    engine::Trajectory t;
    std::string line;
    bool saw_header = false, saw_loss0 = false;
    std::size_t columns = 0;
    while (detail::get_line(in, line)) {
        std::string_view row = detail::trim(line);
        if (row.empty()) continue;
        if (row.front() == '#') {
            std::string_view body = detail::trim(row.substr(1));
            if (body.substr(0, 9) == "schedule=") {
                t.schedule_name = std::string(body.substr(9));
            } else if (body.substr(0, 6) == "loss0=") {
                t.loss0 = detail::parse_double(body.substr(6), "read_trajectory");
                saw_loss0 = true;
            } else if (body.substr(0, 5) == "note=") {
                t.notes.emplace_back(body.substr(5));
            } else if (body.substr(0, 17) == "diverged at step ") {
                t.diverged = true;
                t.diverged_at = detail::parse_int(body.substr(17), "read_trajectory");
            } else {
                throw data_error("read_trajectory: unknown metadata line '" + line + "'");
            }
            continue;
        }
        if (!saw_header) {
            const auto cols = detail::split(row, ',');
            if (cols.size() < 4 || cols[0] != "step" || cols[1] != "loss" || cols[2] != "alpha" ||
                cols[3] != "beta")
                throw data_error("read_trajectory: bad header '" + line + "'");
            for (std::size_t j = 4; j < cols.size(); ++j) {
                if (cols[j].substr(0, 5) != "p_at_")
                    throw data_error("read_trajectory: bad probe column '" + std::string(cols[j]) + "'");
                t.probe_lambdas.push_back(detail::parse_double(cols[j].substr(5), "read_trajectory"));
            }
            columns = cols.size();
            saw_header = true;
            continue;
        }
        const auto toks = detail::split(row, ',');
        if (toks.size() != columns)
            throw data_error("read_trajectory: row width mismatch at '" + line + "'");
        engine::StepRecord rec;
        rec.n = detail::parse_int(toks[0], "read_trajectory");
        rec.loss = detail::parse_double(toks[1], "read_trajectory");
        rec.alpha = detail::parse_double(toks[2], "read_trajectory");
        rec.beta = detail::parse_double(toks[3], "read_trajectory");
        t.records.push_back(rec);
        if (columns > 4) {
            std::vector<double> pv(columns - 4);
            for (std::size_t j = 0; j < pv.size(); ++j)
                pv[j] = detail::parse_double(toks[4 + j], "read_trajectory");
            t.probe_values.push_back(std::move(pv));
        }
    }
    if (!saw_header) throw data_error("read_trajectory: missing header row");
    if (!saw_loss0 && !t.records.empty()) t.loss0 = t.records.front().loss;
    return t;
}

// --- datasets -------------------------------------------------------------------

// Raw binary layout, all little-endian:
//   bytes 0-7   magic "PLOPTRAW"
//   bytes 8-15  rows (u64)    16-23 cols (u64)    24-31 flags (u64, bit 0: targets)
//   rows*cols f64 features, row-major; then rows f64 targets when flagged.
inline constexpr char raw_magic[8] = {'P', 'L', 'O', 'P', 'T', 'R', 'A', 'W'};

namespace detail {

inline void put_u64le(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

inline std::uint64_t get_u64le(std::istream& in, const std::string& where) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw data_error(where + ": truncated");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline void put_f64le(std::ostream& out, double x) {
    put_u64le(out, std::bit_cast<std::uint64_t>(x));
}

inline double get_f64le(std::istream& in, const std::string& where) {
    return std::bit_cast<double>(get_u64le(in, where));
}

} // namespace detail

inline void write_dataset_raw(std::ostream& out, const spectrum::Dataset& data) {
    out.write(raw_magic, 8);
    detail::put_u64le(out, data.rows);
    detail::put_u64le(out, data.cols);
    const bool targets = !data.y.empty();
    detail::put_u64le(out, targets ? 1 : 0);
    for (double v : data.x) detail::put_f64le(out, v);
    if (targets)
        for (double v : data.y) detail::put_f64le(out, v);
    if (!out) throw io_error("write_dataset_raw: stream failure");
}

inline spectrum::Dataset read_dataset_raw(std::istream& in) {
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, raw_magic, 8) != 0)
        throw data_error("read_dataset_raw: not a raw dataset (bad magic)");
    spectrum::Dataset d;
    d.rows = detail::get_u64le(in, "read_dataset_raw");
    d.cols = detail::get_u64le(in, "read_dataset_raw");
    const auto flags = detail::get_u64le(in, "read_dataset_raw");
    if (flags > 1) throw data_error("read_dataset_raw: unknown flags");
    if (d.rows == 0 || d.cols == 0) throw data_error("read_dataset_raw: empty dimensions");
    d.x.resize(d.rows * d.cols);
    for (double& v : d.x) v = detail::get_f64le(in, "read_dataset_raw");
    if (flags & 1) {
        d.y.resize(d.rows);
        for (double& v : d.y) v = detail::get_f64le(in, "read_dataset_raw");
    }
    return d;
}

// Dense-vector CSV: one sample per row, '#' comments skipped; optionally the
// last column is split off as the target.
inline spectrum::Dataset read_dataset_csv(std::istream& in, bool last_column_targets = false) {
    spectrum::Dataset d;
    std::string line;
    while (detail::get_line(in, line)) {
        const auto row = detail::trim(line);
        if (row.empty() || row.front() == '#') continue;
        const auto toks = detail::split(row, ',');
        std::size_t width = toks.size();
        if (last_column_targets) {
            if (width < 2) throw data_error("read_dataset_csv: need a feature and a target column");
            --width;
        }
        if (d.rows == 0)
            d.cols = width;
        else if (width != d.cols)
            throw data_error("read_dataset_csv: ragged row '" + line + "'");
        for (std::size_t j = 0; j < width; ++j)
            d.x.push_back(detail::parse_double(detail::trim(toks[j]), "read_dataset_csv"));
        if (last_column_targets)
            d.y.push_back(detail::parse_double(detail::trim(toks.back()), "read_dataset_csv"));
        ++d.rows;
    }
    if (d.rows == 0) throw data_error("read_dataset_csv: no samples");
    return d;
}

inline void write_dataset_csv(std::ostream& out, const spectrum::Dataset& data) {
    const bool targets = !data.y.empty();
    for (std::size_t i = 0; i < data.rows; ++i) {
        for (std::size_t j = 0; j < data.cols; ++j) {
            if (j) out << ',';
            out << format_g17(data.row(i)[j]);
        }
        if (targets) out << ',' << format_g17(data.y[i]);
        out << '\n';
    }
    if (!out) throw io_error("write_dataset_csv: stream failure");
}

// --- IDX (big-endian multidimensional arrays, as used by MNIST) -----------------

namespace detail {

struct IdxArray {
    std::vector<std::size_t> dims;
    std::vector<double> data;
};

inline std::uint32_t get_u32be(std::istream& in, const std::string& where) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw data_error(where + ": truncated");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

inline IdxArray read_idx(std::istream& in) {
    const auto magic = get_u32be(in, "read_idx");
    if ((magic >> 16) != 0) throw data_error("read_idx: bad magic");
    const unsigned type = (magic >> 8) & 0xff;
    const unsigned ndims = magic & 0xff;
    if (ndims == 0) throw data_error("read_idx: zero-dimensional array");
    IdxArray a;
    std::size_t total = 1;
    for (unsigned i = 0; i < ndims; ++i) {
        a.dims.push_back(get_u32be(in, "read_idx"));
        total *= a.dims.back();
    }
    a.data.resize(total);
    switch (type) {
        case 0x08: { // unsigned byte
            std::vector<unsigned char> buf(total);
            if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(total)))
                throw data_error("read_idx: truncated data");
            for (std::size_t i = 0; i < total; ++i) a.data[i] = buf[i];
            break;
        }
        case 0x0C: // 32-bit int, big-endian
            for (std::size_t i = 0; i < total; ++i)
                a.data[i] = static_cast<std::int32_t>(get_u32be(in, "read_idx"));
            break;
        case 0x0D: // 32-bit float, big-endian
            for (std::size_t i = 0; i < total; ++i)
                a.data[i] = std::bit_cast<float>(get_u32be(in, "read_idx"));
            break;
        case 0x0E: { // 64-bit float, big-endian
            for (std::size_t i = 0; i < total; ++i) {
                const std::uint64_t hi = get_u32be(in, "read_idx");
                const std::uint64_t lo = get_u32be(in, "read_idx");
                a.data[i] = std::bit_cast<double>((hi << 32) | lo);
            }
            break;
        }
        default:
            throw data_error("read_idx: unsupported element type");
    }
    return a;
}

} // namespace detail

// IDX images (first dimension indexes samples, the rest are flattened into
// features) plus an optional 1-D IDX label array of matching length.
inline spectrum::Dataset read_dataset_idx(std::istream& images, std::istream* labels = nullptr) {
    auto img = detail::read_idx(images);
    spectrum::Dataset d;
    d.rows = img.dims.front();
    d.cols = 1;
    for (std::size_t i = 1; i < img.dims.size(); ++i) d.cols *= img.dims[i];
    if (d.rows == 0 || d.cols == 0) throw data_error("read_dataset_idx: empty image array");
    d.x = std::move(img.data);
    if (labels) {
        auto lab = detail::read_idx(*labels);
        if (lab.dims.size() != 1 || lab.dims.front() != d.rows)
            throw data_error("read_dataset_idx: label array does not match image count");
        d.y = std::move(lab.data);
    }
    return d;
}

// --- file wrappers ---------------------------------------------------------------

inline std::ifstream open_input(const std::string& path, bool binary = false) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) throw io_error("cannot open '" + path + "' for reading");
    return in;
}

inline std::ofstream open_output(const std::string& path, bool binary = false) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw io_error("cannot open '" + path + "' for writing");
    return out;
}

inline spectrum::DiscreteMeasure read_measure_file(const std::string& path) {
    auto in = open_input(path);
    return read_measure(in);
}

inline void write_measure_file(const std::string& path, const spectrum::DiscreteMeasure& m) {
    auto out = open_output(path);
    write_measure(out, m);
}

inline spectrum::OperatorProblem read_operator_file(const std::string& path) {
    auto in = open_input(path);
    return read_operator(in);
}

inline void write_operator_file(const std::string& path, const spectrum::OperatorProblem& op) {
    auto out = open_output(path);
    write_operator(out, op);
}

inline engine::Trajectory read_trajectory_file(const std::string& path) {
    auto in = open_input(path);
    return read_trajectory(in);
}

inline void write_trajectory_file(const std::string& path, const engine::Trajectory& t) {
    auto out = open_output(path);
    write_trajectory(out, t);
}

} // namespace plopt::io
