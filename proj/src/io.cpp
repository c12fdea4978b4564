// Copyright 2026 The pdcsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pdcsim/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "pdcsim/error.hpp"

namespace pdcsim {

using Eigen::MatrixXcd;
using json = nlohmann::ordered_json;

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

void write_file_atomic(const std::string& path, std::string_view bytes) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
        if (ec) fail(ErrorKind::io, "cannot create directory " + target.parent_path().string());
    }
    const std::string tmp = path + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::io, "cannot open " + tmp + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) fail(ErrorKind::io, "write failed: " + tmp);
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        fail(ErrorKind::io, "cannot rename onto " + path);
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

class Writer {
  public:
    template <class T>
    void pod(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        char raw[sizeof(T)];
        std::memcpy(raw, &v, sizeof(T));
        buf_.append(raw, sizeof(T));
    }
    void str(std::string_view s) {
        pod(static_cast<std::uint32_t>(s.size()));
        buf_.append(s);
    }
    std::string& buffer() { return buf_; }

  private:
    std::string buf_;
};

class Reader {
  public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <class T>
    T pod() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string str() {
        const auto n = pod<std::uint32_t>();
        need(n);
        std::string s(bytes_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    size_t position() const { return pos_; }

  private:
    void need(size_t n) const {
        if (bytes_.size() - pos_ < n) fail(ErrorKind::io, "binary container truncated");
    }
    std::string_view bytes_;
    size_t pos_ = 0;
};

constexpr char kMagic[8] = {'P', 'D', 'C', 'S', 'I', 'M', 'B', 'C'};

json grid_to_json(const FrequencyGrid& g) {
    return {{"omega_0", g.omega_0}, {"delta_omega", g.delta_omega}, {"n_points", g.n_points}};
}

FrequencyGrid grid_from_json(const json& j) {
    FrequencyGrid g;
    g.omega_0 = j.at("omega_0").get<double>();
    g.delta_omega = j.at("delta_omega").get<double>();
    g.n_points = j.at("n_points").get<int>();
    return g;
}

json matrix_to_json(const MatrixXcd& m) {
    json re = json::array(), im = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json rr = json::array(), ri = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            rr.push_back(m(r, c).real());
            ri.push_back(m(r, c).imag());
        }
        re.push_back(std::move(rr));
        im.push_back(std::move(ri));
    }
    return {{"re", std::move(re)}, {"im", std::move(im)}};
}

MatrixXcd matrix_from_json(const json& j) {
    const json& re = j.at("re");
    const json& im = j.at("im");
    const auto rows = static_cast<Eigen::Index>(re.size());
    const auto cols = rows > 0 ? static_cast<Eigen::Index>(re.at(0).size()) : 0;
    if (im.size() != re.size()) fail(ErrorKind::io, "matrix JSON: re/im row mismatch");
    MatrixXcd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (re.at(r).size() != static_cast<size_t>(cols) ||
            im.at(r).size() != static_cast<size_t>(cols)) {
            fail(ErrorKind::io, "matrix JSON: ragged rows");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = {re[r][c].get<double>(), im[r][c].get<double>()};
        }
    }
    return m;
}

}  // namespace

const MatrixXcd& BinaryContainer::matrix(std::string_view name) const {
    for (const auto& [n, m] : matrices) {
        if (n == name) return m;
    }
    fail(ErrorKind::io, "binary container has no matrix '" + std::string(name) + "'");
}

std::string encode_container(const BinaryContainer& c) {
    Writer w;
    w.buffer().append(kMagic, sizeof kMagic);
    w.pod(kContainerVersion);
    w.str(c.kind);
    w.str(c.metadata_json);
    w.pod(c.z);
    w.pod(static_cast<std::uint32_t>(c.matrices.size()));
    for (const auto& [name, m] : c.matrices) {
        w.str(name);
        w.pod(static_cast<std::uint64_t>(m.rows()));
        w.pod(static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index col = 0; col < m.cols(); ++col) {
                w.pod(m(r, col).real());
                w.pod(m(r, col).imag());
            }
        }
    }
    w.pod(fnv1a(w.buffer()));
    return std::move(w.buffer());
}

BinaryContainer decode_container(std::string_view bytes) {
    if (bytes.size() < sizeof kMagic + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        fail(ErrorKind::io, "not a pdcsim binary container");
    }
    std::uint64_t stored;
    std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
    const std::string_view body = bytes.substr(0, bytes.size() - 8);
    if (fnv1a(body) != stored) fail(ErrorKind::io, "binary container checksum mismatch");

    Reader r(body.substr(sizeof kMagic));
    const auto version = r.pod<std::uint32_t>();
    if (version != kContainerVersion) {
        fail(ErrorKind::io, "unsupported container version " + std::to_string(version));
    }
    BinaryContainer c;
    c.kind = r.str();
    c.metadata_json = r.str();
    c.z = r.pod<double>();
    const auto count = r.pod<std::uint32_t>();
    for (std::uint32_t k = 0; k < count; ++k) {
        std::string name = r.str();
        const auto rows = r.pod<std::uint64_t>();
        const auto cols = r.pod<std::uint64_t>();
        if (rows * cols * 16 > body.size()) fail(ErrorKind::io, "binary container truncated");
        MatrixXcd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                const double re = r.pod<double>();
                m(i, j) = {re, r.pod<double>()};
            }
        }
        c.matrices.emplace_back(std::move(name), std::move(m));
    }
    if (r.position() + sizeof kMagic != body.size()) {
        fail(ErrorKind::io, "binary container has trailing bytes");
    }
    return c;
}

void save_container(const std::string& path, const BinaryContainer& container) {
    write_file_atomic(path, encode_container(container));
}

BinaryContainer load_container(const std::string& path) {
    return decode_container(read_file(path));
}

void save_state(const std::string& path, const CorrelationState& state) {
    BinaryContainer c;
    c.kind = "correlation-state";
    c.metadata_json = json{{"grid", grid_to_json(state.grid)}}.dump();
    c.z = state.z;
    c.matrices = {{"D", state.d}, {"C", state.c}};
    save_container(path, c);
}

CorrelationState load_state(const std::string& path) {
    const BinaryContainer c = load_container(path);
    if (c.kind != "correlation-state") fail(ErrorKind::io, path + " does not hold a state");
    CorrelationState s;
    try {
        s.grid = grid_from_json(json::parse(c.metadata_json).at("grid"));
    } catch (const json::exception& e) {
        fail(ErrorKind::io, std::string("state metadata: ") + e.what());
    }
    s.z = c.z;
    s.d = c.matrix("D");
    s.c = c.matrix("C");
    s.check_structure();
    return s;
}

std::string state_to_json(const CorrelationState& state) {
    json j;
    j["z"] = state.z;
    j["grid"] = grid_to_json(state.grid);
    j["D"] = matrix_to_json(state.d);
    j["C"] = matrix_to_json(state.c);
    return j.dump(1);
}

CorrelationState state_from_json(std::string_view text) {
    CorrelationState s;
    try {
        const json j = json::parse(text);
        s.z = j.at("z").get<double>();
        s.grid = grid_from_json(j.at("grid"));
        s.d = matrix_from_json(j.at("D"));
        s.c = matrix_from_json(j.at("C"));
    } catch (const json::exception& e) {
        fail(ErrorKind::io, std::string("state JSON: ") + e.what());
    }
    s.check_structure();
    return s;
}

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

std::string CsvTable::render() const {
    std::string out;
    for (const auto& [k, v] : metadata) out += "# " + k + ": " + v + "\n";
    for (size_t i = 0; i < columns.size(); ++i) {
        if (i) out += ',';
        out += columns[i];
    }
    out += '\n';
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += format_double(row[i]);
        }
        out += '\n';
    }
    return out;
}

}  // namespace pdcsim
