#include "nsm/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace nsm {

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

namespace {

constexpr char kMapMagic[4] = {'N', 'S', 'M', 'F'};
constexpr char kCheckpointMagic[4] = {'N', 'S', 'M', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::ostream& o, std::uint32_t v) { o.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& in, const std::string& path)
{
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 4)) throw FormatError(path + ": unexpected end of file");
    return v;
}

std::ofstream open_out(const std::string& path)
{
    std::ofstream o(path, std::ios::binary | std::ios::trunc);
    if (!o) throw std::runtime_error("cannot write " + path);
    return o;
}

std::ifstream open_in(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return in;
}

std::uint32_t checked_u32(std::size_t v, const char* what)
{
    if (v > 0xffffffffu) throw FormatError(std::string(what) + " too large");
    return static_cast<std::uint32_t>(v);
}

} // namespace

void write_float_map(const std::string& path, const Tensor<float>& chw)
{
    if (chw.rank() != 3) throw ShapeError("float maps hold (C, H, W) tensors, got " + shape_string(chw.shape()));
    auto o = open_out(path);
    o.write(kMapMagic, 4);
    put_u32(o, checked_u32(chw.width(), "width"));
    put_u32(o, checked_u32(chw.height(), "height"));
    put_u32(o, checked_u32(chw.channels(), "channels"));
    o.write(reinterpret_cast<const char*>(chw.data()), static_cast<std::streamsize>(chw.size() * sizeof(float)));
    if (!o) throw std::runtime_error("error writing " + path);
}

Tensor<float> read_float_map(const std::string& path)
{
    auto in = open_in(path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMapMagic, 4) != 0) throw FormatError(path + ": not a float map");
    const std::uint32_t w = get_u32(in, path), h = get_u32(in, path), c = get_u32(in, path);
    if (w == 0 || h == 0 || c == 0) throw FormatError(path + ": empty float map");
    const std::uint64_t count = static_cast<std::uint64_t>(w) * h * c;
    in.seekg(0, std::ios::end);
    const std::uint64_t bytes = static_cast<std::uint64_t>(in.tellg());
    if (bytes != 16 + 4 * count)
        throw FormatError(path + ": expected " + std::to_string(16 + 4 * count) + " bytes for " + std::to_string(c) +
                          "x" + std::to_string(h) + "x" + std::to_string(w) + ", found " + std::to_string(bytes));
    in.seekg(16);
    Tensor<float> t = Tensor<float>::chw(c, h, w);
    if (!in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(4 * count)))
        throw FormatError(path + ": unexpected end of file");
    return t;
}

void write_pgm(const std::string& path, const Tensor<float>& chw)
{
    if (chw.rank() != 3) throw ShapeError("write_pgm expects a (C, H, W) tensor");
    auto o = open_out(path);
    o << "P5\n" << chw.width() << ' ' << chw.height() << "\n255\n";
    std::vector<unsigned char> px(chw.plane());
    const auto ch = chw.channel(0);
    for (std::size_t i = 0; i < px.size(); ++i) {
        const float v = std::isfinite(ch[i]) ? std::clamp(ch[i], 0.0f, 1.0f) : 0.0f;
        px[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    o.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (!o) throw std::runtime_error("error writing " + path);
}

nlohmann::json to_json(const NetworkConfig& cfg)
{
    return {{"layers", cfg.layers},
            {"base_channels", cfg.base_channels},
            {"in_channels", cfg.in_channels},
            {"use_space_to_depth", cfg.use_space_to_depth},
            {"max_channels", cfg.max_channels},
            {"input_shift", cfg.input_shift},
            {"input_scale", cfg.input_scale},
            {"output_margin", cfg.output_margin}};
}

NetworkConfig network_config_from_json(const nlohmann::json& j)
{
    NetworkConfig c;
    c.layers = j.at("layers").get<int>();
    c.base_channels = j.at("base_channels").get<int>();
    c.in_channels = j.value("in_channels", c.in_channels);
    c.use_space_to_depth = j.value("use_space_to_depth", c.use_space_to_depth);
    c.max_channels = j.value("max_channels", c.max_channels);
    c.input_shift = j.value("input_shift", c.input_shift);
    c.input_scale = j.value("input_scale", c.input_scale);
    c.output_margin = j.value("output_margin", c.output_margin);
    c.validate();
    return c;
}

void save_checkpoint(const std::string& path, const NetworkConfig& cfg, const NetworkWeights& w)
{
    check_weights(cfg, w);
    auto o = open_out(path);
    o.write(kCheckpointMagic, 4);
    put_u32(o, kCheckpointVersion);
    put_u32(o, checked_u32(w.params.size(), "parameter count"));
    for (std::size_t i = 0; i < w.params.size(); ++i) {
        put_u32(o, checked_u32(w.names[i].size(), "name"));
        o.write(w.names[i].data(), static_cast<std::streamsize>(w.names[i].size()));
        const Tensor<float>& p = w.params[i];
        put_u32(o, checked_u32(p.rank(), "rank"));
        for (std::size_t d : p.shape()) put_u32(o, checked_u32(d, "dimension"));
        o.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(float)));
    }
    if (!o) throw std::runtime_error("error writing " + path);
    write_text(path + ".json", to_json(cfg).dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& path)
{
    Checkpoint ck;
    try {
        ck.config = network_config_from_json(nlohmann::json::parse(read_text(path + ".json")));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ".json: " + e.what());
    }
    auto in = open_in(path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) throw FormatError(path + ": not a checkpoint");
    const std::uint32_t version = get_u32(in, path);
    if (version != kCheckpointVersion) throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t count = get_u32(in, path);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t len = get_u32(in, path);
        if (len > 4096) throw FormatError(path + ": corrupt parameter name");
        std::string name(len, '\0');
        if (!in.read(name.data(), len)) throw FormatError(path + ": unexpected end of file");
        const std::uint32_t rank = get_u32(in, path);
        if (rank > 8) throw FormatError(path + ": corrupt parameter rank");
        Dims shape;
        for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(get_u32(in, path));
        Tensor<float> t(shape);
        if (!in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float))))
            throw FormatError(path + ": unexpected end of file");
        ck.weights.names.push_back(std::move(name));
        ck.weights.params.push_back(std::move(t));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError(path + ": trailing bytes");
    try {
        check_weights(ck.config, ck.weights);
    } catch (const ShapeError& e) {
        throw FormatError(path + ": " + e.what());
    }
    return ck;
}

void write_text(const std::string& path, const std::string& text)
{
    auto o = open_out(path);
    o << text;
    if (!o) throw std::runtime_error("error writing " + path);
}

std::string read_text(const std::string& path)
{
    auto in = open_in(path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace nsm
