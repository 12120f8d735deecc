#include "evoclass/data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "evoclass/errors.hpp"
#include "evoclass/image_io.hpp"
#include "evoclass/rng.hpp"

namespace evoclass {

std::string label_name(Label l) { return l == Label::normal ? "normal" : "metastasis"; }

Label parse_label(const std::string& s) {
  if (s == "normal") return Label::normal;
  if (s == "metastasis") return Label::metastasis;
  throw DataError("unknown label token '" + s + "' (want normal|metastasis)");
}

std::string split_name(Split s) { return s == Split::train ? "train" : "test"; }

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw DataError("unknown split token '" + s + "' (want train|test)");
}

void CorpusSpec::validate() const {
  if (n_train_normal < 1 || n_train_met < 1 || n_test_normal < 1 || n_test_met < 1)
    throw ArgumentError("corpus cells must be nonempty");
  if (n_train_normal != n_train_met || n_test_normal != n_test_met)
    throw ArgumentError("corpus classes must be balanced per split");
  if (outside_fraction_train < 0.0 || outside_fraction_train > 1.0 ||
      outside_fraction_test < 0.0 || outside_fraction_test > 1.0)
    throw ArgumentError("outside fractions must lie in [0,1]");
  if (image_size < 32) throw ArgumentError("image_size must be >= 32");
  if (n_institutions < 2) throw ArgumentError("need at least 2 institutions");
  const int total = n_train_normal + n_train_met + n_test_normal + n_test_met;
  if (n_institutions > total)
    throw ArgumentError("more institutions (" + std::to_string(n_institutions) +
                        ") than images (" + std::to_string(total) + ")");
}

int rounded_count(double fraction, int total) {
  return static_cast<int>(std::floor(fraction * total + 0.5));
}

namespace {

constexpr InstitutionProfile kHomeProfile{/*gamma=*/1.0f, /*noise_sigma=*/0.02f,
                                          /*intensity_scale=*/1.0f,
                                          /*bias_field_amp=*/0.08f,
                                          /*vessel_density=*/0.4f,
                                          /*blur_sigma=*/0.4f};

InstitutionProfile sample_profile(uint64_t inst_seed) {
  Rng r(inst_seed);
  InstitutionProfile p;
  p.gamma = static_cast<float>(r.uniform(0.60, 1.60));
  p.noise_sigma = static_cast<float>(r.uniform(0.005, 0.045));
  p.intensity_scale = static_cast<float>(r.uniform(0.75, 1.25));
  p.bias_field_amp = static_cast<float>(r.uniform(0.00, 0.25));
  p.vessel_density = static_cast<float>(r.uniform(0.10, 0.90));
  p.blur_sigma = static_cast<float>(r.uniform(0.00, 1.20));
  return p;
}

void gaussian_blur_inplace(std::vector<float>& img, int s, float sigma,
                           std::vector<float>& tmp) {
  const int radius = std::max(1, static_cast<int>(std::ceil(2.5f * sigma)));
  std::vector<float> kernel(static_cast<size_t>(2 * radius + 1));
  float norm = 0.0f;
  for (int i = -radius; i <= radius; ++i) {
    const float v = std::exp(-0.5f * static_cast<float>(i) * static_cast<float>(i) /
                             (sigma * sigma));
    kernel[static_cast<size_t>(i + radius)] = v;
    norm += v;
  }
  for (float& k : kernel) k /= norm;

  tmp.assign(img.size(), 0.0f);
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i) {
        const int xx = std::clamp(x + i, 0, s - 1);
        acc += kernel[static_cast<size_t>(i + radius)] * img[static_cast<size_t>(y) * s + xx];
      }
      tmp[static_cast<size_t>(y) * s + x] = acc;
    }
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i) {
        const int yy = std::clamp(y + i, 0, s - 1);
        acc += kernel[static_cast<size_t>(i + radius)] * tmp[static_cast<size_t>(yy) * s + x];
      }
      img[static_cast<size_t>(y) * s + x] = acc;
    }
}

struct PhantomGeometry {
  double cx, cy, ax, ay;
};

// Pipeline order is fixed: texture -> vessels -> lesion -> bias field ->
// gamma -> intensity scale -> blur -> noise -> clamp.
void render_image(int s, Label label, const InstitutionProfile& prof, Rng& rng,
                  std::vector<float>& img, std::vector<LesionBox>& boxes,
                  PhantomGeometry& geom) {
  img.assign(static_cast<size_t>(s) * s, 0.0f);
  const double sd = static_cast<double>(s);
  geom.cx = 0.5 * sd + rng.uniform(-0.02 * sd, 0.02 * sd);
  geom.cy = 0.5 * sd + rng.uniform(-0.02 * sd, 0.02 * sd);
  geom.ax = sd * rng.uniform(0.33, 0.38);
  geom.ay = sd * rng.uniform(0.39, 0.44);

  struct Wave {
    double kx, ky, phase, amp;
  };
  Wave waves[3];
  for (Wave& wv : waves) {
    wv.kx = rng.uniform(-4.0, 4.0);
    wv.ky = rng.uniform(-4.0, 4.0);
    wv.phase = rng.uniform(0.0, 2.0 * M_PI);
    wv.amp = rng.uniform(0.02, 0.05);
  }

  auto ellipse_norm = [&](double x, double y) {
    const double dx = (x - geom.cx) / geom.ax;
    const double dy = (y - geom.cy) / geom.ay;
    return dx * dx + dy * dy;
  };

  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x) {
      const double e = ellipse_norm(x, y);
      float v;
      if (e <= 1.0) {
        double t = 0.42 + 0.08 * (1.0 - e);
        for (const Wave& wv : waves)
          t += wv.amp * std::sin(2.0 * M_PI * (wv.kx * x + wv.ky * y) / sd + wv.phase);
        v = static_cast<float>(t);
      } else if (e <= 1.15) {
        v = 0.70f;  // skull rim
      } else {
        v = 0.03f;
      }
      img[static_cast<size_t>(y) * s + x] = v;
    }

  // vessels: short bright random walks, 1-2 px wide
  const int n_vessels = static_cast<int>(std::lround(prof.vessel_density * 6.0));
  for (int v = 0; v < n_vessels; ++v) {
    double px, py;
    do {
      px = rng.uniform(geom.cx - geom.ax, geom.cx + geom.ax);
      py = rng.uniform(geom.cy - geom.ay, geom.cy + geom.ay);
    } while (ellipse_norm(px, py) > 0.7);
    double heading = rng.uniform(0.0, 2.0 * M_PI);
    const float inten = static_cast<float>(rng.uniform(0.10, 0.20));
    const int steps = static_cast<int>(0.45 * sd);
    for (int st = 0; st < steps; ++st) {
      heading += rng.uniform(-0.35, 0.35);
      px += std::cos(heading);
      py += std::sin(heading);
      if (ellipse_norm(px, py) > 0.92) break;
      const int ix = static_cast<int>(px), iy = static_cast<int>(py);
      if (ix < 0 || ix + 1 >= s || iy < 0 || iy >= s) break;
      img[static_cast<size_t>(iy) * s + ix] += inten;
      img[static_cast<size_t>(iy) * s + ix + 1] += 0.5f * inten;
    }
  }

  if (label == Label::metastasis) {
    const int n_lesions = 1 + rng.next_int(3);
    const double min_axis = std::min(geom.ax, geom.ay);
    const double r_hi = std::min(9.0, 0.42 * min_axis - 2.0);
    const double r_lo = std::min(4.0, r_hi - 0.5);
    for (int l = 0; l < n_lesions; ++l) {
      const double r = rng.uniform(std::max(3.0, r_lo), r_hi);
      const float peak = static_cast<float>(rng.uniform(0.35, 0.55));
      const double mx = geom.ax - r - 2.0;
      const double my = geom.ay - r - 2.0;
      double lx, ly;
      do {
        lx = geom.cx + rng.uniform(-mx, mx);
        ly = geom.cy + rng.uniform(-my, my);
      } while ((lx - geom.cx) * (lx - geom.cx) / (mx * mx) +
                   (ly - geom.cy) * (ly - geom.cy) / (my * my) >
               1.0);
      const double sigma = r / 2.0;
      const int lo_y = std::max(0, static_cast<int>(ly - 3 * sigma));
      const int hi_y = std::min(s - 1, static_cast<int>(ly + 3 * sigma) + 1);
      const int lo_x = std::max(0, static_cast<int>(lx - 3 * sigma));
      const int hi_x = std::min(s - 1, static_cast<int>(lx + 3 * sigma) + 1);
      for (int y = lo_y; y <= hi_y; ++y)
        for (int x = lo_x; x <= hi_x; ++x) {
          const double d2 = (x - lx) * (x - lx) + (y - ly) * (y - ly);
          img[static_cast<size_t>(y) * s + x] +=
              peak * static_cast<float>(std::exp(-d2 / (2.0 * sigma * sigma)));
        }
      boxes.push_back({static_cast<float>(lx), static_cast<float>(ly),
                       static_cast<float>(r)});
    }
  }

  if (prof.bias_field_amp > 0.0f) {
    const double theta = rng.uniform(0.0, 2.0 * M_PI);
    const double freq = rng.uniform(0.4, 1.0);
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    const double ux = freq * std::cos(theta) / sd;
    const double uy = freq * std::sin(theta) / sd;
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x)
        img[static_cast<size_t>(y) * s + x] *= static_cast<float>(
            1.0 + prof.bias_field_amp * std::cos(2.0 * M_PI * (ux * x + uy * y) + phase));
  }

  for (float& v : img) v = std::pow(std::clamp(v, 0.0f, 1.0f), prof.gamma);
  for (float& v : img) v *= prof.intensity_scale;

  if (prof.blur_sigma >= 0.05f) {
    std::vector<float> tmp;
    gaussian_blur_inplace(img, s, prof.blur_sigma, tmp);
  }

  for (float& v : img) v += prof.noise_sigma * rng.gaussian();
  // clamp, then snap to the 8-bit grid with the same arithmetic the PGM
  // loader uses, so corpus write -> load round trips are bit exact
  for (float& v : img) {
    const long k = std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f);
    v = static_cast<float>(k) * (1.0f / 255.0f);
  }
}

struct CellPlan {
  Split split;
  Label label;
  int count;
  int outside;  // first `outside` indices of the cell draw an outside site
};

std::string cell_id(const CellPlan& cell, int idx) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%s_%03d", split_name(cell.split).c_str(),
                label_name(cell.label).c_str(), idx);
  return buf;
}

}  // namespace

Corpus generate_corpus(const CorpusSpec& spec, int workers) {
  spec.validate();
  const uint64_t inst_stream = derive(spec.master_seed, "inst");
  const uint64_t img_stream = derive(spec.master_seed, "img");

  Corpus corpus;
  corpus.image_size = spec.image_size;
  corpus.institution_names.push_back("home");
  corpus.profiles.push_back(kHomeProfile);
  for (int k = 1; k < spec.n_institutions; ++k) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "site%02d", k);
    corpus.institution_names.emplace_back(buf);
    corpus.profiles.push_back(sample_profile(derive(inst_stream, static_cast<uint64_t>(k))));
  }

  const int train_total = spec.n_train_normal + spec.n_train_met;
  const int test_total = spec.n_test_normal + spec.n_test_met;
  const int outside_train = rounded_count(spec.outside_fraction_train, train_total);
  const int outside_test = rounded_count(spec.outside_fraction_test, test_total);

  const int train_met_outside = std::min(outside_train, spec.n_train_met);
  const int train_normal_outside = outside_train - train_met_outside;
  const int test_normal_outside = std::min(outside_test, spec.n_test_normal);
  const int test_met_outside = outside_test - test_normal_outside;

  const CellPlan cells[4] = {
      {Split::train, Label::normal, spec.n_train_normal, train_normal_outside},
      {Split::train, Label::metastasis, spec.n_train_met, train_met_outside},
      {Split::test, Label::normal, spec.n_test_normal, test_normal_outside},
      {Split::test, Label::metastasis, spec.n_test_met, test_met_outside},
  };

  struct Slot {
    CellPlan cell;
    int idx_in_cell;
  };
  std::vector<Slot> slots;
  for (const CellPlan& cell : cells)
    for (int i = 0; i < cell.count; ++i) slots.push_back({cell, i});

  corpus.samples.resize(slots.size());
  std::vector<std::array<float, 4>> ellipses(slots.size());

#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (long g = 0; g < static_cast<long>(slots.size()); ++g) {
    const Slot& slot = slots[static_cast<size_t>(g)];
    Rng rng(derive(img_stream, static_cast<uint64_t>(g)));
    int inst = 0;
    if (slot.idx_in_cell < slot.cell.outside)
      inst = 1 + rng.next_int(spec.n_institutions - 1);

    LabeledSample sample;
    sample.id = cell_id(slot.cell, slot.idx_in_cell);
    sample.label = slot.cell.label;
    sample.split = slot.cell.split;
    sample.institution = corpus.institution_names[static_cast<size_t>(inst)];

    std::vector<float> img;
    PhantomGeometry geom{};
    render_image(spec.image_size, sample.label, corpus.profiles[static_cast<size_t>(inst)],
                 rng, img, sample.lesion_boxes, geom);
    sample.image = Tensor({1, spec.image_size, spec.image_size}, std::move(img));
    ellipses[static_cast<size_t>(g)] = {static_cast<float>(geom.cx),
                                        static_cast<float>(geom.cy),
                                        static_cast<float>(geom.ax),
                                        static_cast<float>(geom.ay)};
    corpus.samples[static_cast<size_t>(g)] = std::move(sample);
  }

  corpus.ellipses = std::move(ellipses);
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw DataError("cannot write manifest under " + dir.string());
  manifest << "id,path,label,institution,split\n";

  nlohmann::json truth;
  truth["image_size"] = corpus.image_size;
  for (size_t k = 0; k < corpus.institution_names.size(); ++k) {
    const InstitutionProfile& p = corpus.profiles[k];
    truth["institutions"][corpus.institution_names[k]] = {
        {"gamma", p.gamma},
        {"noise_sigma", p.noise_sigma},
        {"intensity_scale", p.intensity_scale},
        {"bias_field_amp", p.bias_field_amp},
        {"vessel_density", p.vessel_density},
        {"blur_sigma", p.blur_sigma}};
  }
  truth["samples"] = nlohmann::json::array();

  for (size_t i = 0; i < corpus.samples.size(); ++i) {
    const LabeledSample& s = corpus.samples[i];
    const std::string rel = "images/" + s.id + ".pgm";
    GrayImage img;
    img.width = s.image.dim(2);
    img.height = s.image.dim(1);
    img.pixels = s.image.data;
    write_pgm(dir / rel, img);
    manifest << s.id << "," << rel << "," << label_name(s.label) << ","
             << s.institution << "," << split_name(s.split) << "\n";

    nlohmann::json js;
    js["id"] = s.id;
    if (i < corpus.ellipses.size())
      js["ellipse"] = {corpus.ellipses[i][0], corpus.ellipses[i][1],
                       corpus.ellipses[i][2], corpus.ellipses[i][3]};
    js["lesion_boxes"] = nlohmann::json::array();
    for (const LesionBox& b : s.lesion_boxes)
      js["lesion_boxes"].push_back({b.x, b.y, b.radius});
    truth["samples"].push_back(std::move(js));
  }
  if (!manifest) throw DataError("short write to manifest");

  std::ofstream tf(dir / "truth.json");
  tf << truth.dump(2) << "\n";
  if (!tf) throw DataError("cannot write truth.json");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::vector<LabeledSample> load_manifest(const std::filesystem::path& manifest_csv,
                                         int target_size) {
  std::ifstream is(manifest_csv);
  if (!is) throw DataError("cannot open manifest " + manifest_csv.string());
  const std::filesystem::path base = manifest_csv.parent_path();

  std::string line;
  if (!std::getline(is, line)) throw DataError("manifest is empty");
  if (split_csv_line(line) != std::vector<std::string>{"id", "path", "label",
                                                       "institution", "split"})
    throw DataError("manifest header must be id,path,label,institution,split");

  std::vector<LabeledSample> samples;
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 5)
      throw DataError("manifest row " + std::to_string(row) + ": want 5 fields, got " +
                      std::to_string(f.size()));
    LabeledSample s;
    s.id = f[0];
    try {
      s.label = parse_label(f[2]);
      s.institution = f[3];
      s.split = parse_split(f[4]);
      GrayImage img = read_image(base / f[1]);
      if (img.width != target_size || img.height != target_size)
        img = bilinear_resize(img, target_size, target_size);
      s.image = Tensor({1, target_size, target_size}, std::move(img.pixels));
    } catch (const DataError& e) {
      throw DataError("manifest row " + std::to_string(row) + " (" + f[0] + "): " +
                      e.what());
    }
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw ArgumentError("manifest has no data rows");
  return samples;
}

std::map<std::string, std::vector<LesionBox>> load_truth_boxes(
    const std::filesystem::path& truth_json) {
  std::ifstream is(truth_json);
  if (!is) throw DataError("cannot open " + truth_json.string());
  nlohmann::json truth;
  try {
    is >> truth;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(truth_json.string() + ": " + e.what());
  }
  std::map<std::string, std::vector<LesionBox>> out;
  for (const auto& s : truth.at("samples")) {
    std::vector<LesionBox> boxes;
    for (const auto& b : s.at("lesion_boxes"))
      boxes.push_back({b.at(0).get<float>(), b.at(1).get<float>(), b.at(2).get<float>()});
    out[s.at("id").get<std::string>()] = std::move(boxes);
  }
  return out;
}

std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> micro_dataset(
    uint64_t seed) {
  constexpr int kSide = 16;
  constexpr int kPerSplit = 20;
  const uint64_t stream = derive(seed, "micro");

  auto make = [&](Split split, int offset) {
    std::vector<LabeledSample> out;
    for (int i = 0; i < kPerSplit; ++i) {
      Rng rng(derive(stream, static_cast<uint64_t>(offset + i)));
      LabeledSample s;
      const Label label = i < kPerSplit / 2 ? Label::normal : Label::metastasis;
      const float mean = label == Label::normal ? 0.25f : 0.75f;
      char buf[48];
      std::snprintf(buf, sizeof(buf), "micro_%s_%03d", split_name(split).c_str(), i);
      s.id = buf;
      s.label = label;
      s.split = split;
      s.institution = "home";
      std::vector<float> img(kSide * kSide);
      for (float& v : img) v = std::clamp(mean + 0.05f * rng.gaussian(), 0.0f, 1.0f);
      s.image = Tensor({1, kSide, kSide}, std::move(img));
      out.push_back(std::move(s));
    }
    return out;
  };
  return {make(Split::train, 0), make(Split::test, 1000)};
}

double mean_intensity(const std::vector<LabeledSample>& samples) {
  double total = 0.0;
  int64_t n = 0;
  for (const LabeledSample& s : samples) {
    for (float v : s.image.data) total += v;
    n += s.image.numel();
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

}  // namespace evoclass
