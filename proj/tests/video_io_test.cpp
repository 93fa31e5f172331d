#include "vge/video_io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "support/fixtures.hpp"

namespace {

namespace fs = std::filesystem;

using vge::Frame;
using vge::Video;

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::path(::testing::TempDir()) / ("vge_video_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Video sample_video(int count = 5, double fps = 12.0) {
  Video video;
  video.fps = fps;
  video.frames = fixtures::static_video(32, 24, count, /*seed=*/9);
  for (int i = 0; i < count; ++i) {
    // Vary the frames so a shuffled read-back would be caught.
    video.frames[i].rgb[0] = static_cast<std::uint8_t>(10 * i);
  }
  return video;
}

void rewrite_manifest(const fs::path& dir, const nlohmann::json& manifest) {
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << "\n";
}

nlohmann::json read_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  nlohmann::json doc;
  in >> doc;
  return doc;
}

TEST(VideoIo, PpmRoundTripIsPixelExact) {
  fs::path dir = fresh_dir("ppm_round_trip");
  Video original = sample_video();
  vge::save_video(original, dir.string(), "ppm");

  ASSERT_TRUE(fs::exists(dir / "manifest.json"));
  ASSERT_TRUE(fs::exists(dir / "000000.ppm"));
  ASSERT_TRUE(fs::exists(dir / "000004.ppm"));

  Video loaded = vge::load_video(dir.string());
  EXPECT_DOUBLE_EQ(loaded.fps, 12.0);
  ASSERT_EQ(loaded.frames.size(), 5u);
  for (int i = 0; i < 5; ++i) {
    const Frame& got = loaded.frames[i];
    EXPECT_EQ(got.index, i);
    EXPECT_DOUBLE_EQ(got.timestamp, i / 12.0);
    EXPECT_EQ(got.width, 32);
    EXPECT_EQ(got.height, 24);
    EXPECT_EQ(got.rgb, original.frames[i].rgb) << "frame " << i;
  }
}

TEST(VideoIo, PngRoundTripIsPixelExact) {
  fs::path dir = fresh_dir("png_round_trip");
  Video original = sample_video(3, 30.0);
  vge::save_video(original, dir.string(), "png");

  EXPECT_EQ(read_manifest(dir).at("format"), "png");
  ASSERT_TRUE(fs::exists(dir / "000002.png"));
  ASSERT_FALSE(fs::exists(dir / "000000.ppm"));

  Video loaded = vge::load_video(dir.string());
  ASSERT_EQ(loaded.frames.size(), 3u);
  EXPECT_DOUBLE_EQ(loaded.frames[2].timestamp, 2.0 / 30.0);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(loaded.frames[i].rgb, original.frames[i].rgb) << "frame " << i;
  }
}

TEST(VideoIo, InfersExtensionWithoutFormatKey) {
  fs::path dir = fresh_dir("infer_ext");
  vge::save_video(sample_video(2), dir.string(), "ppm");
  nlohmann::json manifest = read_manifest(dir);
  manifest.erase("format");
  rewrite_manifest(dir, manifest);

  Video loaded = vge::load_video(dir.string());
  EXPECT_EQ(loaded.frames.size(), 2u);
}

TEST(VideoIo, MissingManifestThrows) {
  fs::path dir = fresh_dir("no_manifest");
  EXPECT_THROW(vge::load_video(dir.string()), vge::MissingManifest);
  EXPECT_THROW(vge::load_video((dir / "nope").string()), vge::MissingManifest);
}

TEST(VideoIo, MalformedManifestThrows) {
  fs::path dir = fresh_dir("bad_manifest");
  {
    std::ofstream out(dir / "manifest.json");
    out << "{not json";
  }
  EXPECT_THROW(vge::load_video(dir.string()), vge::MalformedJson);

  rewrite_manifest(dir, {{"fps", 12.0}, {"width", 32}, {"height", 24}});  // no count
  EXPECT_THROW(vge::load_video(dir.string()), vge::MalformedJson);

  rewrite_manifest(dir, {{"fps", 0.0}, {"width", 32}, {"height", 24}, {"count", 1}});
  EXPECT_THROW(vge::load_video(dir.string()), vge::MalformedJson);

  rewrite_manifest(dir, {{"fps", 12.0}, {"width", 0}, {"height", 24}, {"count", 1}});
  EXPECT_THROW(vge::load_video(dir.string()), vge::MalformedJson);
}

TEST(VideoIo, GapInFrameSequenceThrows) {
  fs::path dir = fresh_dir("gap");
  vge::save_video(sample_video(4), dir.string(), "ppm");
  fs::remove(dir / "000002.ppm");
  try {
    vge::load_video(dir.string());
    FAIL() << "expected MissingFrame";
  } catch (const vge::MissingFrame& e) {
    EXPECT_NE(std::string(e.what()).find("frame 2"), std::string::npos);
  }
}

TEST(VideoIo, CountMismatchesThrow) {
  fs::path dir = fresh_dir("count");
  vge::save_video(sample_video(3), dir.string(), "ppm");

  nlohmann::json manifest = read_manifest(dir);
  manifest["count"] = 4;  // one more than actually on disk
  rewrite_manifest(dir, manifest);
  EXPECT_THROW(vge::load_video(dir.string()), vge::MissingFrame);

  manifest["count"] = 0;
  rewrite_manifest(dir, manifest);
  EXPECT_THROW(vge::load_video(dir.string()), vge::MissingFrame);

  // Fewer frames than on disk is fine: trailing files are ignored.
  manifest["count"] = 2;
  rewrite_manifest(dir, manifest);
  EXPECT_EQ(vge::load_video(dir.string()).frames.size(), 2u);
}

TEST(VideoIo, FrameDimensionMismatchThrows) {
  fs::path dir = fresh_dir("dims");
  vge::save_video(sample_video(3), dir.string(), "ppm");
  vge::write_ppm((dir / "000001.ppm").string(), Frame(16, 24));
  try {
    vge::load_video(dir.string());
    FAIL() << "expected DimensionMismatch";
  } catch (const vge::DimensionMismatch& e) {
    std::string what = e.what();
    EXPECT_NE(what.find("frame 1"), std::string::npos);
    EXPECT_NE(what.find("16x24"), std::string::npos);
    EXPECT_NE(what.find("32x24"), std::string::npos);
  }
}

TEST(VideoIo, UnsupportedFormatKeyThrows) {
  fs::path dir = fresh_dir("format_key");
  vge::save_video(sample_video(2), dir.string(), "ppm");
  nlohmann::json manifest = read_manifest(dir);
  manifest["format"] = "jpeg";
  rewrite_manifest(dir, manifest);
  EXPECT_THROW(vge::load_video(dir.string()), vge::UnsupportedFormat);
}

TEST(VideoIo, MissingFirstFrameWithoutFormatKeyThrows) {
  fs::path dir = fresh_dir("empty");
  rewrite_manifest(dir, {{"fps", 12.0}, {"width", 32}, {"height", 24}, {"count", 2}});
  EXPECT_THROW(vge::load_video(dir.string()), vge::MissingFrame);
}

TEST(VideoIo, SaveRejectsBadInput) {
  fs::path dir = fresh_dir("save_bad");
  EXPECT_THROW(vge::save_video(Video{}, dir.string(), "ppm"), vge::EmptyVideo);
  EXPECT_THROW(vge::save_video(sample_video(1), dir.string(), "gif"),
               vge::UnsupportedFormat);
}

TEST(VideoIo, PpmReaderHandlesCommentsAndRejectsJunk) {
  fs::path dir = fresh_dir("ppm_quirks");
  // Comments between header tokens are part of the format and must parse.
  {
    std::ofstream out(dir / "comment.ppm", std::ios::binary);
    out << "P6\n# made by hand\n2 1\n# maxval next\n255\n";
    out.write("\x01\x02\x03\x04\x05\x06", 6);
  }
  Frame frame = vge::read_ppm((dir / "comment.ppm").string());
  EXPECT_EQ(frame.width, 2);
  EXPECT_EQ(frame.height, 1);
  EXPECT_EQ(frame.rgb[3], 4);

  {
    std::ofstream out(dir / "p5.ppm", std::ios::binary);
    out << "P5\n2 1\n255\n";
    out.write("\x01\x02", 2);
  }
  EXPECT_THROW(vge::read_ppm((dir / "p5.ppm").string()), vge::UnsupportedFormat);

  {
    std::ofstream out(dir / "short.ppm", std::ios::binary);
    out << "P6\n2 2\n255\n";
    out.write("\x01\x02\x03", 3);
  }
  EXPECT_THROW(vge::read_ppm((dir / "short.ppm").string()), vge::IoError);

  {
    std::ofstream out(dir / "maxval.ppm", std::ios::binary);
    out << "P6\n1 1\n65535\n";
    out.write("\x01\x02\x03\x04\x05\x06", 6);
  }
  EXPECT_THROW(vge::read_ppm((dir / "maxval.ppm").string()), vge::UnsupportedFormat);

  EXPECT_THROW(vge::read_image((dir / "frame.gif").string()), vge::UnsupportedFormat);
  EXPECT_THROW(vge::read_png((dir / "comment.ppm").string()), vge::UnsupportedFormat);
}

}  // namespace
