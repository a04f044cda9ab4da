#include "stfmri/io.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <limits>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stfmri::io {

static_assert(std::endian::native == std::endian::little,
              "series.f64 and state blobs are little-endian; big-endian hosts are unsupported");

void write_f64(const fs::path& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    out.write(reinterpret_cast<const char*>(rm.data()),
              static_cast<std::streamsize>(rm.size() * sizeof(double)));
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

Eigen::MatrixXd read_f64(const fs::path& path, Eigen::Index rows, Eigen::Index cols) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("missing file " + path.string());
    }
    const auto expected = static_cast<std::uintmax_t>(rows * cols) * sizeof(double);
    const auto actual = fs::file_size(path);
    if (actual != expected) {
        throw std::runtime_error("size mismatch in " + path.string() + ": expected " +
                                 std::to_string(expected) + " bytes, found " + std::to_string(actual));
    }
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(expected));
    if (!in) {
        throw std::runtime_error("read failed for " + path.string());
    }
    return rm;
}

void write_matrix(const fs::path& dir, const std::string& name, const Eigen::MatrixXd& m) {
    write_f64(dir / (name + ".f64"), m);
    std::ofstream dims(dir / (name + ".dims"), std::ios::trunc);
    dims << m.rows() << ' ' << m.cols() << '\n';
    if (!dims) {
        throw std::runtime_error("write failed for " + (dir / (name + ".dims")).string());
    }
}

Eigen::MatrixXd read_matrix(const fs::path& dir, const std::string& name) {
    std::ifstream dims(dir / (name + ".dims"));
    if (!dims) {
        throw std::runtime_error("missing file " + (dir / (name + ".dims")).string());
    }
    long long rows = -1;
    long long cols = -1;
    dims >> rows >> cols;
    if (!dims || rows < 0 || cols < 0) {
        throw std::runtime_error("corrupt dimension file " + (dir / (name + ".dims")).string());
    }
    return read_f64(dir / (name + ".f64"), rows, cols);
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
        // from_chars rejects "inf"/"nan" spellings produced by some writers.
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        throw std::runtime_error("not a number: '" + s + "'");
    }
    return v;
}

void KeyValues::set(const std::string& key, const std::string& value) {
    if (key.empty() || key.find_first_of(" =\n") != std::string::npos) {
        throw std::invalid_argument("invalid key '" + key + "'");
    }
    if (value.find('\n') != std::string::npos) {
        throw std::invalid_argument("value for '" + key + "' contains a newline");
    }
    if (!values_.count(key)) {
        order_.push_back(key);
    }
    values_[key] = value;
}

void KeyValues::set(const std::string& key, double value) {
    set(key, format_double(value));
}

void KeyValues::set(const std::string& key, long long value) {
    set(key, std::to_string(value));
}

void KeyValues::set(const std::string& key, const std::vector<double>& values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) s += ' ';
        s += format_double(values[i]);
    }
    set(key, s);
}

void KeyValues::set(const std::string& key, const std::vector<int>& values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) s += ' ';
        s += std::to_string(values[i]);
    }
    set(key, s);
}

const std::string& KeyValues::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        throw std::runtime_error("missing key '" + key + "'");
    }
    return it->second;
}

double KeyValues::get_double(const std::string& key) const {
    return parse_double(get(key));
}

long long KeyValues::get_int(const std::string& key) const {
    const std::string& s = get(key);
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw std::runtime_error("key '" + key + "' is not an integer: '" + s + "'");
    }
    return v;
}

std::vector<double> KeyValues::get_doubles(const std::string& key) const {
    std::istringstream in(get(key));
    std::vector<double> out;
    std::string tok;
    while (in >> tok) {
        out.push_back(parse_double(tok));
    }
    return out;
}

std::vector<int> KeyValues::get_ints(const std::string& key) const {
    std::istringstream in(get(key));
    std::vector<int> out;
    std::string tok;
    while (in >> tok) {
        int v = 0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
            throw std::runtime_error("key '" + key + "' holds a non-integer: '" + tok + "'");
        }
        out.push_back(v);
    }
    return out;
}

void KeyValues::save(const fs::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    for (const auto& key : order_) {
        out << key << " = " << values_.at(key) << '\n';
    }
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

KeyValues KeyValues::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("missing file " + path.string());
    }
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) {
            // Allow empty values written as "key = " with trailing space stripped.
            if (line.size() >= 2 && line.compare(line.size() - 2, 2, " =") == 0) {
                kv.set(line.substr(0, line.size() - 2), std::string());
                continue;
            }
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": malformed line");
        }
        kv.set(line.substr(0, eq), line.substr(eq + 3));
    }
    return kv;
}

std::ofstream open_report(const fs::path& path, const std::string& schema) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << "# schema=" << schema << " version=1\n";
    return out;
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace stfmri::io
