#include "fdavae/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fdavae/errors.hpp"

namespace fdavae {

void write_pgm(const Image& image, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << "P5\n";
  f << "# range " << image.range_lo << " " << image.range_hi << "\n";
  f << image.width << " " << image.height << "\n65535\n";
  const double span = static_cast<double>(image.range_hi) - image.range_lo;
  const double scale = span > 0.0 ? 65535.0 / span : 0.0;
  std::vector<unsigned char> buf(image.size() * 2);
  for (std::size_t i = 0; i < image.size(); ++i) {
    double v = (image.pixels[i] - image.range_lo) * scale;
    v = std::clamp(v, 0.0, 65535.0);
    const auto u = static_cast<std::uint16_t>(std::lround(v));
    buf[2 * i] = static_cast<unsigned char>(u >> 8);
    buf[2 * i + 1] = static_cast<unsigned char>(u & 0xFF);
  }
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  if (!f) throw IoError("write failed: " + path);
}

namespace {

// Reads the next whitespace-separated PGM header token, skipping comments,
// and reports range comments through *lo/*hi.
std::string next_token(std::istream& is, float* lo, float* hi) {
  std::string tok;
  while (is) {
    const int ch = is.peek();
    if (ch == '#') {
      std::string line;
      std::getline(is, line);
      std::istringstream cs(line.substr(1));
      std::string tag;
      if (cs >> tag && tag == "range") {
        float a, b;
        if (cs >> a >> b) {
          *lo = a;
          *hi = b;
        }
      }
      continue;
    }
    if (std::isspace(ch)) {
      is.get();
      continue;
    }
    is >> tok;
    return tok;
  }
  return tok;
}

}  // namespace

Image read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  float lo = -1.0f, hi = 1.0f;
  const std::string magic = next_token(f, &lo, &hi);
  if (magic != "P5") throw IoError("not a binary PGM (P5): " + path);
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(next_token(f, &lo, &hi));
    height = std::stoi(next_token(f, &lo, &hi));
    maxval = std::stoi(next_token(f, &lo, &hi));
  } catch (const std::exception&) {
    throw IoError("malformed PGM header: " + path);
  }
  if (width < 1 || height < 1 || (maxval != 255 && maxval != 65535))
    throw IoError("unsupported PGM geometry/maxval in " + path);
  f.get();  // single whitespace after maxval

  Image image(height, width, lo, hi);
  const std::size_t count = image.size();
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> buf(count * bytes);
  f.read(reinterpret_cast<char*>(buf.data()),
         static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(f.gcount()) != buf.size())
    throw IoError("truncated PGM payload: " + path);
  const double span = static_cast<double>(hi) - lo;
  const double scale = span / maxval;
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned v = bytes == 2
                           ? (static_cast<unsigned>(buf[2 * i]) << 8) | buf[2 * i + 1]
                           : buf[i];
    image.pixels[i] = static_cast<float>(lo + v * scale);
  }
  return image;
}

std::vector<ManifestRow> read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open manifest: " + path);
  std::vector<ManifestRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    ManifestRow row;
    if (!(std::getline(is, row.sample_id, '\t') &&
          std::getline(is, row.group_id, '\t') &&
          std::getline(is, row.path_a, '\t') &&
          std::getline(is, row.path_b)))
      throw IoError("manifest " + path + ": line " + std::to_string(lineno) +
                    " is not 4 tab-separated fields");
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_manifest(const std::vector<ManifestRow>& rows,
                    const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << "# sample_id\tgroup_id\tpath_a\tpath_b\n";
  for (const auto& r : rows)
    f << r.sample_id << '\t' << r.group_id << '\t' << r.path_a << '\t'
      << r.path_b << '\n';
  if (!f) throw IoError("write failed: " + path);
}

std::vector<PhasePair> load_pair_dataset(const std::string& root_path,
                                         const std::vector<ManifestRow>& rows,
                                         const PreprocessConfig& config,
                                         bool fail_fast,
                                         std::vector<std::string>* errors) {
  namespace fs = std::filesystem;
  std::vector<PhasePair> pairs;
  pairs.reserve(rows.size());
  auto resolve = [&](const std::string& p) {
    fs::path fp(p);
    return fp.is_absolute() ? fp.string() : (fs::path(root_path) / fp).string();
  };
  for (const auto& row : rows) {
    try {
      PhasePair pair;
      pair.sample_id = row.sample_id;
      pair.group_id = row.group_id;
      if (pair.group_id.empty())
        throw IoError("empty group_id");
      pair.phase_a = read_pgm(resolve(row.path_a));
      pair.phase_b = read_pgm(resolve(row.path_b));
      if (pair.phase_a.height != pair.phase_b.height ||
          pair.phase_a.width != pair.phase_b.width)
        throw IoError("phase size mismatch (" +
                      std::to_string(pair.phase_a.width) + "x" +
                      std::to_string(pair.phase_a.height) + " vs " +
                      std::to_string(pair.phase_b.width) + "x" +
                      std::to_string(pair.phase_b.height) + ")");
      for (Image* img : {&pair.phase_a, &pair.phase_b}) {
        Image processed = clip_intensities(*img, config.clip_top_fraction);
        processed = normalize(processed);
        if (config.target_h > 0 && config.target_w > 0)
          processed = resize(processed, config.target_h, config.target_w);
        assert_in_range(processed, "load_pair_dataset");
        *img = std::move(processed);
      }
      pairs.push_back(std::move(pair));
    } catch (const std::exception& e) {
      const std::string msg = "sample '" + row.sample_id + "': " + e.what();
      if (fail_fast) throw IoError(msg);
      if (errors) errors->push_back(msg);
    }
  }
  return pairs;
}

}  // namespace fdavae
