#include "rawden/frame_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace rawden {

namespace {

// Skips netpbm whitespace and '#' comments, returning the next token.
std::string next_token(std::istream& in)
{
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {}
            continue;
        }
        if (std::isspace(ch))
            continue;
        tok.push_back(static_cast<char>(ch));
        while ((ch = in.peek()) != EOF && !std::isspace(ch) && ch != '#')
            tok.push_back(static_cast<char>(in.get()));
        return tok;
    }
    return tok;
}

long tell(std::istream& in)
{
    const auto pos = in.tellg();
    return pos < 0 ? -1 : static_cast<long>(pos);
}

int parse_pnm_int(std::istream& in, const std::string& what, const std::string& path)
{
    const std::string tok = next_token(in);
    if (tok.empty())
        throw FormatError(path + ": missing " + what, tell(in));
    try {
        return std::stoi(tok);
    } catch (const std::exception&) {
        throw FormatError(path + ": bad " + what + " '" + tok + "'", tell(in));
    }
}

uint16_t to_u16(float v)
{
    const float r = std::round(v);
    if (r <= 0.f) return 0;
    if (r >= 65535.f) return 65535;
    return static_cast<uint16_t>(r);
}

} // namespace

Image read_netpbm(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path + "' for reading");

    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || (m1 != '5' && m1 != '6'))
        throw FormatError(path + ": not a binary P5/P6 netpbm file", 0);
    const int channels = (m1 == '5') ? 1 : 3;

    const int width = parse_pnm_int(in, "width", path);
    const int height = parse_pnm_int(in, "height", path);
    const int maxval = parse_pnm_int(in, "maxval", path);
    if (width <= 0 || height <= 0)
        throw FormatError(path + ": non-positive dimensions", tell(in));
    if (maxval != 65535)
        throw FormatError(path + ": maxval must be 65535, got " + std::to_string(maxval), tell(in));
    in.get(); // single whitespace byte before the payload

    const size_t n = static_cast<size_t>(width) * height * channels;
    std::vector<uint8_t> raw(n * 2);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<size_t>(in.gcount()) != raw.size())
        throw FormatError(path + ": truncated payload", tell(in));

    // samples are big-endian, interleaved for P6; store planar
    Image img(width, height, channels);
    for (size_t i = 0; i < n; ++i) {
        const uint16_t v = static_cast<uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
        const size_t pixel = i / channels;
        const size_t c = i % channels;
        img.data()[img.plane_size() * c + pixel] = static_cast<float>(v);
    }
    return img;
}

void write_netpbm(const std::string& path, const Image& img)
{
    if (img.channels() != 1 && img.channels() != 3)
        throw DimensionError("write_netpbm: image must have 1 or 3 channels");

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open '" + path + "' for writing");

    out << (img.channels() == 1 ? "P5" : "P6") << "\n"
        << img.width() << " " << img.height() << "\n65535\n";

    const size_t n_pixels = img.plane_size();
    std::vector<uint8_t> raw(n_pixels * img.channels() * 2);
    for (size_t p = 0; p < n_pixels; ++p)
        for (int c = 0; c < img.channels(); ++c) {
            const uint16_t v = to_u16(img.data()[img.plane_size() * c + p]);
            const size_t i = p * img.channels() + c;
            raw[2 * i] = static_cast<uint8_t>(v >> 8);
            raw[2 * i + 1] = static_cast<uint8_t>(v & 0xff);
        }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out)
        throw IoError("failed writing '" + path + "'");
}

namespace {

constexpr char kFloatMagic[4] = {'R', 'D', 'F', '1'};

uint32_t read_u32_le(std::istream& in, const std::string& path)
{
    uint8_t b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4)
        throw FormatError(path + ": truncated header", tell(in));
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_u32_le(std::ostream& out, uint32_t v)
{
    const uint8_t b[4] = {static_cast<uint8_t>(v & 0xff), static_cast<uint8_t>((v >> 8) & 0xff),
                          static_cast<uint8_t>((v >> 16) & 0xff), static_cast<uint8_t>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

} // namespace

Image read_float_frame(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path + "' for reading");

    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kFloatMagic, 4) != 0)
        throw FormatError(path + ": missing RDF1 magic", 0);

    const uint32_t w = read_u32_le(in, path);
    const uint32_t h = read_u32_le(in, path);
    const uint32_t c = read_u32_le(in, path);
    if (w == 0 || h == 0 || c == 0 || c > 16)
        throw FormatError(path + ": bad dimensions", tell(in));

    Image img(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c));
    const std::streamsize bytes = static_cast<std::streamsize>(img.size() * sizeof(float));
    in.read(reinterpret_cast<char*>(img.data()), bytes);
    if (in.gcount() != bytes)
        throw FormatError(path + ": truncated payload", tell(in));
    return img;
}

void write_float_frame(const std::string& path, const Image& img)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open '" + path + "' for writing");
    out.write(kFloatMagic, 4);
    write_u32_le(out, static_cast<uint32_t>(img.width()));
    write_u32_le(out, static_cast<uint32_t>(img.height()));
    write_u32_le(out, static_cast<uint32_t>(img.channels()));
    out.write(reinterpret_cast<const char*>(img.data()),
              static_cast<std::streamsize>(img.size() * sizeof(float)));
    if (!out)
        throw IoError("failed writing '" + path + "'");
}

Sidecar read_sidecar(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open sidecar '" + path + "'");

    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("sidecar '" + path + "': " + e.what());
    }

    Sidecar s;
    try {
        s.phase = bayer_phase_from_string(j.at("phase").get<std::string>());
        s.black_level = j.at("black_level").get<double>();
        const auto gains = j.at("wb_gains");
        if (gains.size() != 4)
            throw ConfigError("wb_gains must have 4 entries");
        for (int i = 0; i < 4; ++i)
            s.wb_gains[i] = gains[i].get<double>();
        s.iso = j.at("iso").get<double>();
        if (j.contains("white_level"))
            s.white_level = j["white_level"].get<double>();
        if (j.contains("gamma"))
            s.gamma = j["gamma"].get<double>();
        if (j.contains("ccm")) {
            const auto& m = j["ccm"];
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    s.ccm[r][c] = m.at(r).at(c).get<double>();
        }
        if (j.contains("noise")) {
            s.noise_a = j["noise"].at("a").get<double>();
            s.noise_b = j["noise"].at("b").get<double>();
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("sidecar '" + path + "': " + e.what());
    }
    return s;
}

void write_sidecar(const std::string& path, const Sidecar& s)
{
    nlohmann::json j;
    j["phase"] = to_string(s.phase);
    j["black_level"] = s.black_level;
    j["wb_gains"] = s.wb_gains;
    j["iso"] = s.iso;
    j["white_level"] = s.white_level;
    j["gamma"] = s.gamma;
    j["ccm"] = s.ccm;
    if (s.noise_a && s.noise_b)
        j["noise"] = {{"a", *s.noise_a}, {"b", *s.noise_b}};

    std::ofstream out(path);
    if (!out)
        throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
}

std::vector<std::string> list_frames(const std::string& dir)
{
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir))
        throw IoError("'" + dir + "' is not a directory");

    std::vector<std::string> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file())
            continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".pgm" || ext == ".ppm")
            out.push_back(entry.path().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace rawden
