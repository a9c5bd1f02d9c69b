#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "archmap/cli.hpp"

namespace fixtures {

namespace fs = std::filesystem;

/// Fresh scratch directory, removed on destruction.
struct Scratch {
    fs::path path;
    explicit Scratch(const std::string &name) : path(fs::temp_directory_path() / ("archmap_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~Scratch() { fs::remove_all(path); }
    fs::path operator/(const std::string &rel) const { return path / rel; }
};

inline std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const fs::path &p, const std::string &text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

struct CliResult {
    int status = 0;
    std::string out, err;
};

inline CliResult cli(std::vector<std::string> args) {
    args.insert(args.begin(), "archmap");
    std::ostringstream out, err;
    const int status = archmap::run_cli(args, out, err);
    return {status, out.str(), err.str()};
}

inline std::vector<std::vector<std::string>> read_csv(const fs::path &p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::string cell;
        bool quoted = false;
        for (char ch : line) {
            if (ch == '"') quoted = !quoted;
            else if (ch == ',' && !quoted) {
                cells.push_back(cell);
                cell.clear();
            } else cell += ch;
        }
        cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

/// Small renders keep the end-to-end tests quick.
inline const char *kSmallRenderIni = "[render]\nwidth = 320\nheight = 240\n";

} // namespace fixtures
