#include <gtest/gtest.h>

#include "support.hpp"
#include "vlmaudit/csv.hpp"
#include "vlmaudit/error.hpp"
#include "vlmaudit/hash.hpp"
#include "vlmaudit/image.hpp"

using namespace vlmaudit;
using testing_support::TempDir;

TEST(Csv, QuotedFieldsAndEmbeddedNewlines) {
    const auto rows = csv::parse("a,b\n\"x,1\",\"he said \"\"hi\"\"\"\n\"multi\nline\",z\n");
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[1][0], "x,1");
    EXPECT_EQ(rows[1][1], "he said \"hi\"");
    EXPECT_EQ(rows[2][0], "multi\nline");
}

TEST(Csv, CrLfBomAndBlankLines) {
    const auto rows = csv::parse("\xEF\xBB\xBFh1,h2\r\n\r\n1,2\r\n");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0][0], "h1");
    EXPECT_EQ(rows[1][1], "2");
}

TEST(Csv, EmptyTrailingField) {
    const auto rows = csv::parse("a,b,\n");
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].size(), 3u);
    EXPECT_EQ(rows[0][2], "");
}

TEST(Csv, EscapeRoundTrip) {
    const csv::Row row{"plain", "with,comma", "quote\"d", "line\nbreak", ""};
    const auto parsed = csv::parse(csv::join(row) + "\n");
    ASSERT_EQ(parsed.size(), 1u);
    EXPECT_EQ(parsed[0], row);
}

TEST(Csv, ReadTableTracksLineNumbers) {
    TempDir dir;
    csv::write_file(dir / "t.csv", "h\n\"a\nb\"\n\nc\n");
    const auto t = csv::read_table(dir / "t.csv");
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.lines[0], 2u);
    EXPECT_EQ(t.lines[1], 5u);
}

TEST(Csv, MissingColumnNamesIt) {
    try {
        csv::column({"a", "b"}, "zeta");
        FAIL();
    } catch (const LoadError& e) {
        EXPECT_NE(std::string(e.what()).find("zeta"), std::string::npos);
    }
}

TEST(Csv, ReadMissingFileIsIoError) {
    EXPECT_THROW(csv::read_file("/nonexistent/dir/file.csv"), IoError);
}

TEST(Hash, KnownSha256Vectors) {
    EXPECT_EQ(to_hex(sha256(std::string_view(""))),
              "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(to_hex(sha256(std::string_view("abc"))),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Hash, Base64KnownAndRoundTrip) {
    const std::string s = "foobar";
    const std::vector<std::uint8_t> bytes(s.begin(), s.end());
    EXPECT_EQ(base64_encode(bytes), "Zm9vYmFy");
    const std::vector<std::uint8_t> two{'f', 'o'};
    EXPECT_EQ(base64_encode(two), "Zm8=");
    EXPECT_EQ(base64_decode("Zm8="), two);

    std::mt19937 rng(7);
    for (std::size_t len = 0; len < 40; ++len) {
        std::vector<std::uint8_t> data(len);
        for (auto& b : data) b = static_cast<std::uint8_t>(rng());
        EXPECT_EQ(base64_decode(base64_encode(data)), data) << len;
    }
}

TEST(Hash, DigestPrefixIsBigEndian) {
    Sha256Digest d{};
    d[0] = 0x01;
    d[7] = 0xFF;
    EXPECT_EQ(digest_prefix64(d), 0x01000000000000FFULL);
}

TEST(BundledFixture, MeansFileIsPinned) {
    const auto text = csv::read_file(bundled_data_dir() / "appendix_a.csv");
    EXPECT_EQ(to_hex(sha256(text)), "c88431cce8b9872913152cf08245a3daf8740f777469a2fd2c7d77a8fbce08ab");
}

TEST(Png, RoundTripPixelsAndText) {
    const auto img = synthetic_image(42, 13, 7);
    const auto bytes = encode_png(img, {{kTagsChunk, "a,b"}, {"note", "x"}});
    EXPECT_TRUE(looks_like_png(bytes));
    const auto decoded = decode_png(bytes);
    EXPECT_EQ(decoded.image.width, 13);
    EXPECT_EQ(decoded.image.height, 7);
    EXPECT_EQ(decoded.image.pixels, img.pixels);
    EXPECT_EQ(decoded.text.at("note"), "x");
    EXPECT_EQ(content_tags(bytes), (std::vector<std::string>{"a", "b"}));

    const auto probe = probe_png(bytes);
    ASSERT_TRUE(probe.has_value());
    EXPECT_EQ(probe->width, 13);
    EXPECT_EQ(probe->text.at(kTagsChunk), "a,b");
}

TEST(Png, EncodingIsDeterministic) {
    const auto img = synthetic_image(1, 32, 32);
    EXPECT_EQ(encode_png(img), encode_png(img));
    EXPECT_NE(synthetic_image(1, 32, 32).pixels, synthetic_image(2, 32, 32).pixels);
}

TEST(Png, GarbageIsRejected) {
    const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5, 6, 7, 8, 9};
    EXPECT_FALSE(looks_like_png(junk));
    EXPECT_THROW(decode_png(junk), ComputationError);
    EXPECT_FALSE(probe_png(junk).has_value());

    auto truncated = encode_png(synthetic_image(3, 16, 16));
    truncated.resize(truncated.size() / 2);
    EXPECT_THROW(decode_png(truncated), ComputationError);
}

TEST(Png, UntaggedImageHasNoTags) {
    EXPECT_TRUE(content_tags(encode_png(synthetic_image(5, 4, 4))).empty());
}
