#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mmtalker/errors.hpp"

namespace mmtalker {

// Binary container used for every tensor-valued artifact in the repo:
// audio features, sample sets, parameter checkpoints, animation frames.
//
// Layout:
//   bytes 0..7    magic "MMTKFEAT"
//   bytes 8..15   header byte length, u64 little-endian
//   header        JSON: {"arrays":[{"name","shape","dtype"},...],"meta":{...}}
//   payloads      one per array, header order, row-major, densely packed,
//                 little-endian f32 or f64 per the declared dtype
//
// Round trips are bit-exact: f32 values survive the in-memory double
// representation losslessly, and the header is regenerated canonically.
enum class Dtype { f32, f64 };

struct NamedArray {
    std::vector<std::size_t> shape;
    Dtype dtype = Dtype::f64;
    std::vector<double> data;  // row-major

    std::size_t count() const {
        std::size_t n = 1;
        for (std::size_t s : shape) n *= s;
        return n;
    }
};

class FeatureContainer {
public:
    static constexpr char kMagic[9] = "MMTKFEAT";

    bool has(const std::string& name) const { return arrays_.count(name) > 0; }

    const NamedArray& array(const std::string& name) const {
        auto it = arrays_.find(name);
        if (it == arrays_.end()) throw MissingField("array '" + name + "' not in container");
        return it->second;
    }

    void set(const std::string& name, std::vector<std::size_t> shape, std::vector<double> data,
             Dtype dtype = Dtype::f64) {
        NamedArray a;
        a.shape = std::move(shape);
        a.dtype = dtype;
        a.data = std::move(data);
        if (a.count() != a.data.size())
            throw ShapeMismatch("array '" + name + "' shape does not match payload size");
        if (!arrays_.count(name)) order_.push_back(name);
        arrays_[name] = std::move(a);
    }

    void set_matrix(const std::string& name, const Eigen::MatrixXd& m, Dtype dtype = Dtype::f64) {
        std::vector<double> data(static_cast<std::size_t>(m.rows() * m.cols()));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                data[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
        set(name, {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
            std::move(data), dtype);
    }

    Eigen::MatrixXd matrix(const std::string& name) const {
        const NamedArray& a = array(name);
        if (a.shape.size() != 2)
            throw ShapeMismatch("array '" + name + "' is not 2-D");
        Eigen::MatrixXd m(a.shape[0], a.shape[1]);
        for (std::size_t r = 0; r < a.shape[0]; ++r)
            for (std::size_t c = 0; c < a.shape[1]; ++c)
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    a.data[r * a.shape[1] + c];
        return m;
    }

    void set_scalar(const std::string& name, double v) { set(name, {}, {v}); }

    double scalar(const std::string& name) const {
        const NamedArray& a = array(name);
        if (a.count() != 1) throw ShapeMismatch("array '" + name + "' is not a scalar");
        return a.data[0];
    }

    const std::vector<std::string>& names() const { return order_; }

    nlohmann::json& meta() { return meta_; }
    const nlohmann::json& meta() const { return meta_; }

    bool has_nonfinite() const {
        for (const auto& [name, a] : arrays_)
            for (double v : a.data)
                if (!std::isfinite(v)) return true;
        return false;
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot open '" + path + "' for writing");

        nlohmann::json header;
        header["arrays"] = nlohmann::json::array();
        for (const std::string& name : order_) {
            const NamedArray& a = arrays_.at(name);
            nlohmann::json rec;
            rec["name"] = name;
            rec["shape"] = a.shape;
            rec["dtype"] = a.dtype == Dtype::f64 ? "f64" : "f32";
            header["arrays"].push_back(rec);
        }
        if (!meta_.is_null() && !meta_.empty()) header["meta"] = meta_;
        const std::string header_text = header.dump();

        out.write(kMagic, 8);
        const std::uint64_t hlen = header_text.size();
        char lenbuf[8];
        for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<char>((hlen >> (8 * i)) & 0xff);
        out.write(lenbuf, 8);
        out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

        for (const std::string& name : order_) {
            const NamedArray& a = arrays_.at(name);
            if (a.dtype == Dtype::f64) {
                out.write(reinterpret_cast<const char*>(a.data.data()),
                          static_cast<std::streamsize>(a.data.size() * 8));
            } else {
                std::vector<float> f(a.data.begin(), a.data.end());
                out.write(reinterpret_cast<const char*>(f.data()),
                          static_cast<std::streamsize>(f.size() * 4));
            }
        }
        if (!out) throw IoError("write failed for '" + path + "'");
    }

    static FeatureContainer load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open '" + path + "' for reading");

        char magic[8];
        in.read(magic, 8);
        if (!in || std::memcmp(magic, kMagic, 8) != 0)
            throw FormatError("'" + path + "' is not a feature container (bad magic)");

        char lenbuf[8];
        in.read(lenbuf, 8);
        if (!in) throw FormatError("truncated header length in '" + path + "'");
        std::uint64_t hlen = 0;
        for (int i = 0; i < 8; ++i)
            hlen |= static_cast<std::uint64_t>(static_cast<unsigned char>(lenbuf[i])) << (8 * i);

        std::string header_text(hlen, '\0');
        in.read(header_text.data(), static_cast<std::streamsize>(hlen));
        if (!in) throw FormatError("truncated header in '" + path + "'");

        nlohmann::json header;
        try {
            header = nlohmann::json::parse(header_text);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("header is not valid JSON: ") + e.what());
        }
        if (!header.contains("arrays") || !header["arrays"].is_array())
            throw FormatError("header missing 'arrays' list");

        FeatureContainer fc;
        if (header.contains("meta")) fc.meta_ = header["meta"];
        for (const auto& rec : header["arrays"]) {
            if (!rec.contains("name") || !rec.contains("shape") || !rec.contains("dtype"))
                throw FormatError("array record missing name/shape/dtype");
            const std::string name = rec["name"].get<std::string>();
            const std::string dt = rec["dtype"].get<std::string>();
            NamedArray a;
            a.shape = rec["shape"].get<std::vector<std::size_t>>();
            if (dt == "f64")
                a.dtype = Dtype::f64;
            else if (dt == "f32")
                a.dtype = Dtype::f32;
            else
                throw FormatError("unknown dtype '" + dt + "'");

            const std::size_t n = a.count();
            a.data.resize(n);
            if (a.dtype == Dtype::f64) {
                in.read(reinterpret_cast<char*>(a.data.data()), static_cast<std::streamsize>(n * 8));
            } else {
                std::vector<float> f(n);
                in.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(n * 4));
                for (std::size_t i = 0; i < n; ++i) a.data[i] = static_cast<double>(f[i]);
            }
            if (!in) throw FormatError("truncated payload for array '" + name + "'");
            fc.order_.push_back(name);
            fc.arrays_[name] = std::move(a);
        }
        return fc;
    }

private:
    std::vector<std::string> order_;
    std::map<std::string, NamedArray> arrays_;
    nlohmann::json meta_;
};

}  // namespace mmtalker
