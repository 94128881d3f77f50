#include "stfuse/raster.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace stfuse::io {

static_assert(std::endian::native == std::endian::little,
              "MRF1 writer assumes a little-endian host");

namespace {

constexpr const char* kMagic = "MRF1";

void expect_line(std::istream& in, const std::filesystem::path& path,
                 const std::string& key, std::string& value) {
    std::string line;
    if (!std::getline(in, line))
        throw IoError("raster " + path.string() + ": truncated header (missing " + key + ")");
    if (key.empty()) {
        value = line;
        return;
    }
    if (line.rfind(key + " ", 0) != 0)
        throw IoError("raster " + path.string() + ": expected header line '" + key +
                      " ...', got '" + line + "'");
    value = line.substr(key.size() + 1);
}

int parse_positive(const std::string& text, const std::filesystem::path& path,
                   const char* what) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(text, &pos);
        if (pos != text.size() || v <= 0) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw IoError("raster " + path.string() + ": invalid " + what + " '" + text + "'");
    }
}

}  // namespace

Raster Raster::from_vector(int rows, int cols, int bands, Eigen::VectorXd data) {
    Raster r;
    r.rows = rows;
    r.cols = cols;
    r.bands = bands;
    if (data.size() != static_cast<Eigen::Index>(rows) * cols * bands)
        throw ConfigError("raster data length does not match rows*cols*bands");
    r.samples = std::move(data);
    return r;
}

void write_raster(const std::filesystem::path& path, const Raster& raster) {
    if (raster.rows <= 0 || raster.cols <= 0 || raster.bands <= 0)
        throw ConfigError("raster dims must be positive");
    const Eigen::Index count =
        static_cast<Eigen::Index>(raster.rows) * raster.cols * raster.bands;
    if (raster.samples.size() != count)
        throw ConfigError("raster sample count does not match header dims");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open raster for writing: " + path.string());
    out << kMagic << "\n"
        << "rows " << raster.rows << "\n"
        << "cols " << raster.cols << "\n"
        << "bands " << raster.bands << "\n"
        << "dtype float32\n"
        << "layout band-major\n"
        << "endian little\n";

    std::vector<float> buf(static_cast<std::size_t>(count));
    for (Eigen::Index i = 0; i < count; ++i) {
        const double v = raster.samples[i];
        buf[static_cast<std::size_t>(i)] =
            std::isnan(v) ? std::numeric_limits<float>::quiet_NaN()
                          : static_cast<float>(v);
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!out) throw IoError("failed writing raster payload: " + path.string());
}

Raster read_raster(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open raster: " + path.string());

    std::string value;
    expect_line(in, path, "", value);
    if (value != kMagic)
        throw IoError("raster " + path.string() + ": bad magic '" + value + "'");

    Raster r;
    expect_line(in, path, "rows", value);
    r.rows = parse_positive(value, path, "rows");
    expect_line(in, path, "cols", value);
    r.cols = parse_positive(value, path, "cols");
    expect_line(in, path, "bands", value);
    r.bands = parse_positive(value, path, "bands");
    expect_line(in, path, "dtype", value);
    if (value != "float32")
        throw IoError("raster " + path.string() + ": unsupported dtype '" + value + "'");
    expect_line(in, path, "layout", value);
    if (value != "band-major")
        throw IoError("raster " + path.string() + ": unsupported layout '" + value + "'");
    expect_line(in, path, "endian", value);
    if (value != "little")
        throw IoError("raster " + path.string() + ": unsupported endianness '" + value + "'");

    const Eigen::Index count = static_cast<Eigen::Index>(r.rows) * r.cols * r.bands;
    std::vector<float> buf(static_cast<std::size_t>(count));
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(float)))
        throw IoError("raster " + path.string() + ": payload shorter than rows*cols*bands");
    char extra;
    if (in.read(&extra, 1))
        throw IoError("raster " + path.string() + ": payload longer than rows*cols*bands");

    r.samples.resize(count);
    for (Eigen::Index i = 0; i < count; ++i)
        r.samples[i] = static_cast<double>(buf[static_cast<std::size_t>(i)]);
    return r;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path.string());
    const std::filesystem::path base = path.parent_path();

    std::string line;
    if (!std::getline(in, line) || line != "step,modality,raster_path,quality_path")
        throw IoError("manifest " + path.string() + ": missing or malformed header row");

    std::vector<ManifestEntry> entries;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (line.back() == ',') fields.emplace_back();
        if (fields.size() != 4) {
            std::ostringstream msg;
            msg << "manifest " << path.string() << ":" << line_no
                << ": expected 4 fields, got " << fields.size();
            throw IoError(msg.str());
        }
        ManifestEntry e;
        try {
            e.step = std::stoi(fields[0]);
        } catch (const std::exception&) {
            std::ostringstream msg;
            msg << "manifest " << path.string() << ":" << line_no << ": bad step '"
                << fields[0] << "'";
            throw IoError(msg.str());
        }
        e.modality = fields[1];
        e.raster_path = base / fields[2];
        if (!fields[3].empty()) e.quality_path = base / fields[3];
        entries.push_back(std::move(e));
    }
    return entries;
}

void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestEntry>& entries) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open manifest for writing: " + path.string());
    out << "step,modality,raster_path,quality_path\n";
    for (const auto& e : entries) {
        const std::string rp = e.raster_path.generic_string();
        const std::string qp = e.quality_path.generic_string();
        if (e.modality.find(',') != std::string::npos ||
            rp.find(',') != std::string::npos || qp.find(',') != std::string::npos)
            throw IoError("manifest fields must not contain commas");
        out << e.step << "," << e.modality << "," << rp << "," << qp << "\n";
    }
    if (!out) throw IoError("failed writing manifest: " + path.string());
}

std::vector<int> codes_from_raster(const Raster& raster) {
    if (raster.bands != 1)
        throw IoError("quality raster must have exactly one band");
    std::vector<int> codes(static_cast<std::size_t>(raster.samples.size()));
    for (Eigen::Index i = 0; i < raster.samples.size(); ++i) {
        const double v = raster.samples[i];
        if (!std::isfinite(v))
            throw IoError("quality raster contains a non-finite code");
        codes[static_cast<std::size_t>(i)] = static_cast<int>(std::lround(v));
    }
    return codes;
}

}  // namespace stfuse::io
