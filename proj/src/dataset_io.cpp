#include "riskscape/dataset_io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace riskscape {

namespace {

constexpr char kMagic[4] = {'R', 'S', 'K', 'D'};
constexpr std::uint32_t kFormatVersion = 1;

std::uint32_t family_tag(const std::optional<Family>& f) {
    if (!f) return 0xffffffffu;
    switch (*f) {
        case Family::classification: return 0;
        case Family::robust_regression: return 1;
        case Family::gmm2: return 2;
    }
    return 0xffffffffu;
}

std::optional<Family> family_from_tag(std::uint32_t tag) {
    switch (tag) {
        case 0: return Family::classification;
        case 1: return Family::robust_regression;
        case 2: return Family::gmm2;
        default: return std::nullopt;
    }
}

std::uint32_t kind_tag(ResponseKind k) {
    switch (k) {
        case ResponseKind::binary: return 0;
        case ResponseKind::real: return 1;
        case ResponseKind::none: return 2;
    }
    return 2;
}

ResponseKind kind_from_tag(std::uint32_t tag) {
    switch (tag) {
        case 0: return ResponseKind::binary;
        case 1: return ResponseKind::real;
        case 2: return ResponseKind::none;
        default: throw InvalidInput("dataset file: bad response kind tag");
    }
}

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw InvalidInput("dataset file: truncated");
    return v;
}

}  // namespace

void write_dataset(const std::string& path, const Dataset& data) {
    data.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidInput("cannot open for writing: " + path);
    os.write(kMagic, 4);
    put<std::uint32_t>(os, kFormatVersion);
    put<std::uint32_t>(os, family_tag(data.family));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(data.n()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(data.dim()));
    put<std::uint32_t>(os, kind_tag(data.response_kind));
    os.write(reinterpret_cast<const char*>(data.features.data()),
             static_cast<std::streamsize>(sizeof(double) * data.features.size()));
    if (data.response_kind != ResponseKind::none)
        os.write(reinterpret_cast<const char*>(data.responses.data()),
                 static_cast<std::streamsize>(sizeof(double) * data.responses.size()));
    if (!os) throw InvalidInput("write failed: " + path);
}

Dataset read_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InvalidInput("cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) throw InvalidInput("dataset file: bad magic");
    const auto version = get<std::uint32_t>(is);
    if (version != kFormatVersion) throw InvalidInput("dataset file: unsupported version");
    const auto ftag = get<std::uint32_t>(is);
    const auto n = static_cast<Eigen::Index>(get<std::uint64_t>(is));
    const auto d = static_cast<Eigen::Index>(get<std::uint64_t>(is));
    const auto kind = kind_from_tag(get<std::uint32_t>(is));
    if (n < 0 || d <= 0) throw InvalidInput("dataset file: bad shape");
    Dataset data;
    data.family = family_from_tag(ftag);
    data.response_kind = kind;
    data.features.resize(n, d);
    is.read(reinterpret_cast<char*>(data.features.data()),
            static_cast<std::streamsize>(sizeof(double) * data.features.size()));
    if (kind != ResponseKind::none) {
        data.responses.resize(n);
        is.read(reinterpret_cast<char*>(data.responses.data()),
                static_cast<std::streamsize>(sizeof(double) * n));
    }
    if (!is) throw InvalidInput("dataset file: truncated");
    data.validate();
    return data;
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
    data.validate();
    std::ofstream os(path);
    if (!os) throw InvalidInput("cannot open for writing: " + path);
    char buf[40];
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        for (Eigen::Index j = 0; j < data.dim(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", data.features(i, j));
            os << (j ? "," : "") << buf;
        }
        if (data.response_kind != ResponseKind::none) {
            std::snprintf(buf, sizeof(buf), "%.17g", data.responses[i]);
            os << ',' << buf;
        }
        os << '\n';
    }
    if (!os) throw InvalidInput("write failed: " + path);
}

Dataset read_dataset_csv(const std::string& path, ResponseKind kind, std::optional<Family> family) {
    std::ifstream is(path);
    if (!is) throw InvalidInput("cannot open: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            throw InvalidInput("csv: ragged rows in " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw InvalidInput("csv: no data in " + path);
    const bool has_resp = kind != ResponseKind::none;
    const auto d = static_cast<Eigen::Index>(rows.front().size()) - (has_resp ? 1 : 0);
    if (d <= 0) throw InvalidInput("csv: too few columns in " + path);
    Dataset data;
    data.family = family;
    data.response_kind = kind;
    data.features.resize(static_cast<Eigen::Index>(rows.size()), d);
    if (has_resp) data.responses.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (Eigen::Index j = 0; j < d; ++j) data.features(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
        if (has_resp) data.responses[static_cast<Eigen::Index>(i)] = rows[i].back();
    }
    data.validate();
    return data;
}

}  // namespace riskscape
