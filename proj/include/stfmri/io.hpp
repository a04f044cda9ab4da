#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace stfmri::io {

namespace fs = std::filesystem;

/// Raw little-endian float64, row-major.
void write_f64(const fs::path& path, const Eigen::MatrixXd& m);
/// Reads rows x cols values; throws on a byte-length mismatch.
Eigen::MatrixXd read_f64(const fs::path& path, Eigen::Index rows, Eigen::Index cols);

/// Writes `<dir>/<name>.f64` plus the `<dir>/<name>.dims` sidecar ("rows cols").
void write_matrix(const fs::path& dir, const std::string& name, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(const fs::path& dir, const std::string& name);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& s);

/// Ordered `key = value` text file.
class KeyValues {
public:
    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, double value);
    void set(const std::string& key, long long value);
    void set(const std::string& key, int value) { set(key, static_cast<long long>(value)); }
    void set(const std::string& key, const std::vector<double>& values);
    void set(const std::string& key, const std::vector<int>& values);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    const std::string& get(const std::string& key) const;
    double get_double(const std::string& key) const;
    long long get_int(const std::string& key) const;
    std::vector<double> get_doubles(const std::string& key) const;
    std::vector<int> get_ints(const std::string& key) const;

    void save(const fs::path& path) const;
    static KeyValues load(const fs::path& path);

private:
    std::vector<std::string> order_;
    std::map<std::string, std::string> values_;
};

/// Opens a report CSV and writes the `# schema=<name> version=1` line.
std::ofstream open_report(const fs::path& path, const std::string& schema);

/// FNV-1a 64-bit hash rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

}  // namespace stfmri::io
