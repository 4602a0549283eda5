#include "t2sgrid/frame_ingest.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "t2sgrid/error.hpp"

namespace t2sgrid {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<double> FrameSequence::times() const {
  std::vector<double> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f.source_time);
  return out;
}

Timeline Timeline::of(const FrameSequence& seq) {
  return {seq.video_id, seq.times(), seq.sample_fps};
}

void FrameSequence::validate() const {
  if (!(sample_fps > 0.0)) throw Error(Errc::kInvalidSequence, video_id + ": sample_fps must be > 0");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Frame& f = frames[i];
    if (f.index != static_cast<int>(i)) {
      throw Error(Errc::kInvalidSequence, video_id + ": frame indices not contiguous at " + std::to_string(i));
    }
    if (i > 0 && !(f.source_time > frames[i - 1].source_time)) {
      throw Error(Errc::kInvalidSequence, video_id + ": source times not strictly increasing at " + std::to_string(i));
    }
    if (f.image.width() != resolution.width || f.image.height() != resolution.height) {
      throw Error(Errc::kResolutionMismatch, video_id + ": frame " + std::to_string(i));
    }
  }
}

std::optional<FrameDirMeta> read_frame_dir_meta(const fs::path& dir) {
  const fs::path path = dir / kMetaFileName;
  if (!fs::exists(path)) return std::nullopt;
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot read " + path.string());
  FrameDirMeta meta;
  try {
    const json j = json::parse(in);
    if (j.contains("duration_s") && !j["duration_s"].is_null()) meta.duration_s = j["duration_s"].get<double>();
    if (j.contains("fps") && !j["fps"].is_null()) meta.fps = j["fps"].get<double>();
  } catch (const json::exception& e) {
    throw Error(Errc::kSchemaError, path.string() + ": " + e.what());
  }
  return meta;
}

void write_frame_dir_meta(const fs::path& dir, const FrameDirMeta& meta) {
  json j = json::object();
  if (meta.duration_s) j["duration_s"] = *meta.duration_s;
  if (meta.fps) j["fps"] = *meta.fps;
  std::ofstream out(dir / kMetaFileName, std::ios::trunc);
  if (!out) throw Error(Errc::kIoError, "cannot write " + (dir / kMetaFileName).string());
  out << j.dump(2) << '\n';
}

namespace {

bool is_numeric_stem(const std::string& stem) {
  return !stem.empty() &&
         std::all_of(stem.begin(), stem.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

double resolve_fps(const std::optional<FrameDirMeta>& meta, std::optional<double> fps_hint) {
  double fps = 1.0;
  if (meta && meta->fps) {
    fps = *meta->fps;
  } else if (fps_hint) {
    fps = *fps_hint;
  }
  if (!(fps > 0.0) || !std::isfinite(fps)) {
    throw Error(Errc::kInvalidTarget, "frame rate must be positive, got " + std::to_string(fps));
  }
  return fps;
}

}  // namespace

std::vector<fs::path> list_frame_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(Errc::kIoError, "not a directory: " + dir.string());
  std::vector<std::pair<unsigned long long, fs::path>> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const fs::path& p = entry.path();
    if (!is_supported_image(p)) continue;
    const std::string stem = p.stem().string();
    if (!is_numeric_stem(stem) || stem.size() > 18) continue;
    found.emplace_back(std::stoull(stem), p);
  }
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  out.reserve(found.size());
  for (auto& [n, p] : found) out.push_back(std::move(p));
  return out;
}

FrameSequence load_frame_directory(const fs::path& dir, std::optional<double> fps_hint) {
  const auto files = list_frame_files(dir);
  if (files.empty()) throw Error(Errc::kNoFrames, dir.string());
  const auto meta = read_frame_dir_meta(dir);
  const double fps = resolve_fps(meta, fps_hint);

  FrameSequence seq;
  seq.video_id = dir.filename().string();
  if (seq.video_id.empty()) seq.video_id = dir.parent_path().filename().string();
  seq.sample_fps = fps;
  seq.frames.reserve(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    Image img = read_image(files[i]);
    if (i == 0) {
      seq.resolution = {img.width(), img.height()};
    } else if (img.width() != seq.resolution.width || img.height() != seq.resolution.height) {
      throw Error(Errc::kResolutionMismatch,
                  files[i].string() + " is " + std::to_string(img.width()) + "x" +
                      std::to_string(img.height()) + ", expected " +
                      std::to_string(seq.resolution.width) + "x" + std::to_string(seq.resolution.height));
    }
    seq.frames.push_back({static_cast<int>(i), static_cast<double>(i) / fps, std::move(img)});
  }
  return seq;
}

SourceVideo describe_frame_directory(const fs::path& dir, std::optional<double> fps_hint) {
  const auto files = list_frame_files(dir);
  if (files.empty()) throw Error(Errc::kNoFrames, dir.string());
  const auto meta = read_frame_dir_meta(dir);
  SourceVideo v;
  v.id = dir.filename().string();
  v.native_fps = resolve_fps(meta, fps_hint);
  v.duration_s = (meta && meta->duration_s) ? *meta->duration_s
                                            : static_cast<double>(files.size()) / v.native_fps;
  v.frame_locator = dir;
  return v;
}

void write_frame_directory(const FrameSequence& seq, const fs::path& dir, const std::string& ext) {
  fs::create_directories(dir);
  char name[32];
  for (const Frame& f : seq.frames) {
    std::snprintf(name, sizeof(name), "%06d.%s", f.index, ext.c_str());
    write_image(f.image, dir / name);
  }
  FrameDirMeta meta;
  meta.fps = seq.sample_fps;
  meta.duration_s = static_cast<double>(seq.size()) / seq.sample_fps;
  write_frame_dir_meta(dir, meta);
}

std::vector<int> uniform_count_indices(int source_length, int count) {
  if (count <= 0) throw Error(Errc::kInvalidTarget, "sample count must be > 0");
  if (source_length <= 0) throw Error(Errc::kNoFrames, "cannot sample an empty sequence");
  const int n = std::min(count, source_length);
  if (n == 1) return {(source_length - 1) / 2};
  std::vector<int> out(n);
  // round(j * (T-1) / (n-1)) in exact integer arithmetic, halves rounded up.
  const long long span = source_length - 1;
  const long long den = n - 1;
  for (int j = 0; j < n; ++j) {
    out[j] = static_cast<int>((2 * j * span + den) / (2 * den));
  }
  return out;
}

std::vector<int> uniform_fps_indices(const std::vector<double>& times, double fps) {
  if (!(fps > 0.0) || !std::isfinite(fps)) throw Error(Errc::kInvalidTarget, "sample fps must be > 0");
  if (times.empty()) throw Error(Errc::kNoFrames, "cannot sample an empty sequence");
  const double first = times.front();
  const double last = times.back();
  constexpr double kSlack = 1e-9;
  std::vector<int> out;
  for (long long j = 0;; ++j) {
    const double t = first + static_cast<double>(j) / fps;
    if (t > last + kSlack) break;
    auto it = std::lower_bound(times.begin(), times.end(), t);
    int idx = static_cast<int>(it - times.begin());
    if (it == times.end()) {
      idx = static_cast<int>(times.size()) - 1;
    } else if (idx > 0 && (t - times[idx - 1]) <= (times[idx] - t)) {
      --idx;
    }
    if (out.empty() || out.back() != idx) out.push_back(idx);
  }
  return out;
}

FrameSequence sample_uniform(const FrameSequence& seq, const SampleTarget& target) {
  std::vector<int> picked;
  if (const auto* c = std::get_if<CountTarget>(&target)) {
    picked = uniform_count_indices(static_cast<int>(seq.size()), c->count);
  } else {
    picked = uniform_fps_indices(seq.times(), std::get<FpsTarget>(target).fps);
  }

  FrameSequence out;
  out.video_id = seq.video_id;
  out.resolution = seq.resolution;
  out.frames.reserve(picked.size());
  for (std::size_t j = 0; j < picked.size(); ++j) {
    const Frame& src = seq.frames[picked[j]];
    out.frames.push_back({static_cast<int>(j), src.source_time, src.image});
  }
  if (out.size() > 1) {
    out.sample_fps = static_cast<double>(out.size() - 1) /
                     (out.frames.back().source_time - out.frames.front().source_time);
  } else {
    out.sample_fps = seq.sample_fps;
  }
  return out;
}

namespace {

std::string substitute(std::string word, const std::string& key, const std::string& value) {
  for (std::size_t pos = word.find(key); pos != std::string::npos; pos = word.find(key, pos + value.size())) {
    word.replace(pos, key.size(), value);
  }
  return word;
}

}  // namespace

void decode_video(const fs::path& input, const fs::path& output_dir, double fps,
                  const DecoderCommand& decoder) {
  if (!(fps > 0.0)) throw Error(Errc::kInvalidTarget, "decoder fps must be > 0");
  if (decoder.argv.empty()) throw Error(Errc::kConfigError, "empty decoder command");
  fs::create_directories(output_dir);

  std::ostringstream fps_text;
  fps_text << fps;
  std::vector<std::string> args;
  for (const auto& word : decoder.argv) {
    std::string w = substitute(word, "{input}", input.string());
    w = substitute(w, "{output}", output_dir.string());
    args.push_back(substitute(w, "{fps}", fps_text.str()));
  }
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  const pid_t pid = fork();
  if (pid < 0) throw Error(Errc::kDecodeError, "fork failed for decoder " + args.front());
  if (pid == 0) {
    execvp(argv[0], argv.data());
    _exit(127);
  }
  int status = 0;
  while (waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw Error(Errc::kDecodeError, "waitpid failed for decoder");
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    throw Error(Errc::kDecodeError,
                input.string() + ": decoder exited with status " + std::to_string(code));
  }
  if (list_frame_files(output_dir).empty()) {
    throw Error(Errc::kDecodeError, input.string() + ": decoder produced no frames");
  }
  auto meta = read_frame_dir_meta(output_dir).value_or(FrameDirMeta{});
  if (!meta.fps) {
    meta.fps = fps;
    write_frame_dir_meta(output_dir, meta);
  }
}

}  // namespace t2sgrid
