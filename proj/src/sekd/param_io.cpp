#include "hvqa/sekd/param_io.hpp"

#include <bit>
#include <cstring>
#include <map>

#include "hvqa/common.hpp"

namespace hvqa::sekd {

namespace {

static_assert(std::endian::native == std::endian::little, "params.bin writer assumes a little-endian host");

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

class Reader {
  public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::string_view take(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }

  private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw ValidationError("params file truncated");
    }
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_params(const Params& params, const Projector<double>& projector, std::string_view metadata_json) {
    std::string out(kParamsMagic);
    put_u32(out, kParamsVersion);
    put_u32(out, static_cast<std::uint32_t>(metadata_json.size()));
    out += metadata_json;

    std::string body;
    std::uint32_t count = 0;
    auto write = [&](const std::string& name, const auto& t) {
        ++count;
        put_u32(body, static_cast<std::uint32_t>(name.size()));
        body += name;
        put_u32(body, static_cast<std::uint32_t>(t.rows()));
        put_u32(body, static_cast<std::uint32_t>(t.cols()));
        for (Eigen::Index i = 0; i < t.rows(); ++i) {
            for (Eigen::Index j = 0; j < t.cols(); ++j) {
                const double v = t(i, j);
                char raw[sizeof(double)];
                std::memcpy(raw, &v, sizeof v);
                body.append(raw, sizeof raw);
            }
        }
    };
    params.for_each_tensor(write);
    auto proj = projector;
    proj.for_each_tensor(write);
    put_u32(out, count);
    out += body;
    return out;
}

LoadedParams deserialize_params(std::string_view bytes) {
    Reader r(bytes);
    if (r.take(kParamsMagic.size()) != kParamsMagic) throw ValidationError("not a params file (bad magic)");
    if (const auto v = r.u32(); v != kParamsVersion) throw ValidationError("unsupported params version " + std::to_string(v));
    LoadedParams out;
    out.metadata_json = std::string(r.take(r.u32()));

    std::map<std::string, Eigen::MatrixXd> tensors;
    std::vector<std::string> order;
    const std::uint32_t count = r.u32();
    for (std::uint32_t k = 0; k < count; ++k) {
        std::string name(r.take(r.u32()));
        const std::uint32_t rows = r.u32();
        const std::uint32_t cols = r.u32();
        const std::string_view raw = r.take(static_cast<std::size_t>(rows) * cols * sizeof(double));
        Eigen::MatrixXd m(rows, cols);
        for (std::uint32_t i = 0; i < rows; ++i) {
            for (std::uint32_t j = 0; j < cols; ++j) {
                double v;
                std::memcpy(&v, raw.data() + (static_cast<std::size_t>(i) * cols + j) * sizeof(double), sizeof v);
                m(i, j) = v;
            }
        }
        order.push_back(name);
        tensors.emplace(std::move(name), std::move(m));
    }
    if (!r.done()) throw ValidationError("params file has trailing bytes");

    auto grab = [&](const std::string& name) -> Eigen::MatrixXd& {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ValidationError("params file lacks tensor '" + name + "'");
        return it->second;
    };
    int depth = 0;
    while (tensors.count("level" + std::to_string(depth + 1) + ".A")) ++depth;
    if (depth == 0) throw ValidationError("params file holds no scorer levels");
    for (int l = 1; l <= depth; ++l) {
        const std::string p = "level" + std::to_string(l) + ".";
        LevelWeights<double> w;
        w.A = grab(p + "A");
        w.a = grab(p + "a");
        w.C = grab(p + "C");
        w.c = grab(p + "c");
        w.O = grab(p + "O");
        w.o = grab(p + "o");
        out.params.levels.push_back(std::move(w));
    }
    out.params.embed = grab("embed");
    for (const auto& name : order) {
        if (name.rfind("W", 0) == 0) out.projector.W.push_back(tensors.at(name));
    }
    return out;
}

}  // namespace hvqa::sekd
