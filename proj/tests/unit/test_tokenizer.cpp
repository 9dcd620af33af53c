#include <filesystem>
#include <fstream>
#include <numeric>
#include <string_view>

#include "doctest.h"
#include "fatality/error.hpp"
#include "fatality/rng.hpp"
#include "fatality/tokenizer.hpp"

using namespace std::string_view_literals;
using namespace fatality;
using namespace fatality::tokenizer;

namespace {

struct Case {
  std::string_view text;
  std::size_t max_len;
  std::vector<TokenId> prefix;
};

const std::vector<Case> kCases = {
#include "tokenizer_cases.inc"
};

std::filesystem::path write_temp(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / ("fatality_tok_" + name);
  std::ofstream(path, std::ios::binary) << body;
  return path;
}

const Vocabulary& test_vocab() {
  static const Vocabulary v = Vocabulary::load(FATALITY_DATA_DIR "/vocab_test.txt");
  return v;
}

Vocabulary tiny_vocab() {
  return Vocabulary({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "taliban", "kill", "##ed", "district"});
}

void check_invariants(const EncodedInput& e, std::size_t max_len, std::size_t vocab_size) {
  REQUIRE(e.input_word_ids.size() == max_len);
  REQUIRE(e.input_mask.size() == max_len);
  REQUIRE(e.input_type_ids.size() == max_len);
  const std::size_t real = e.real_tokens();
  CHECK(real >= 2);
  for (std::size_t i = 0; i < max_len; ++i) {
    CHECK(e.input_mask[i] == (i < real ? 1 : 0));
    CHECK(e.input_type_ids[i] == 0);
    CHECK(e.input_word_ids[i] >= 0);
    CHECK(static_cast<std::size_t>(e.input_word_ids[i]) < vocab_size);
    if (i >= real) CHECK(e.input_word_ids[i] == 0);
  }
  CHECK(e.input_word_ids[0] == 2);
  CHECK(e.input_word_ids[real - 1] == 3);
}

}  // namespace

TEST_CASE("load_vocab") {
  const auto ok = Vocabulary::load(
      write_temp("ok.txt", "[PAD]\n[UNK]\n[CLS]\n[SEP]\ntaliban\nkill\n##ed\ndistrict\n"));
  CHECK(ok.size() == 8);
  CHECK(ok.cls_id() == 2);
  CHECK(ok.find("##ed") == 6);
  CHECK(ok.token(5) == "kill");
  CHECK_FALSE(ok.find("zzz").has_value());

  try {
    (void)Vocabulary::load(write_temp("nosep.txt", "[PAD]\n[UNK]\n[CLS]\ntaliban\n"));
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("[SEP]") != std::string::npos);
  }
  try {
    (void)Vocabulary::load(write_temp("dup.txt", "[PAD]\n[UNK]\n[CLS]\n[SEP]\ntaliban\ntaliban\n"));
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
  }
  CHECK_THROWS_AS(Vocabulary::load(write_temp("empty.txt", "")), DataError);
  CHECK_THROWS_AS(Vocabulary::load("/nonexistent/vocab.txt"), DataError);
}

TEST_CASE("normalize examples") {
  CHECK(normalize("Taliban-led attack.") ==
        std::vector<std::string>{"taliban", "-", "led", "attack", "."});
  CHECK(normalize("").empty());
  CHECK(normalize("Caf\xC3\xA9") == std::vector<std::string>{"cafe"});
  CHECK(normalize("a\tb\nc") == std::vector<std::string>{"a", "b", "c"});
  CHECK(normalize("\xE6\x94\xBB\xE5\x87\xBB") == std::vector<std::string>{"\xE6\x94\xBB", "\xE5\x87\xBB"});
  CHECK(normalize("$5^") == std::vector<std::string>{"$", "5", "^"});
}

TEST_CASE("wordpiece examples") {
  const auto v = tiny_vocab();
  CHECK(wordpiece("killed", v) == std::vector<TokenId>{5, 6});
  CHECK(wordpiece("taliban", v) == std::vector<TokenId>{4});
  CHECK(wordpiece("zzz", v) == std::vector<TokenId>{1});
  CHECK(wordpiece("killedx", v) == std::vector<TokenId>{1});
  CHECK(wordpiece(std::string(101, 'a'), v) == std::vector<TokenId>{1});
}

TEST_CASE("encode examples") {
  const auto v = tiny_vocab();
  const auto e = encode("Taliban killed", v);
  std::vector<TokenId> ids(128, 0);
  ids[0] = 2, ids[1] = 4, ids[2] = 5, ids[3] = 6, ids[4] = 3;
  CHECK(e.input_word_ids == ids);
  std::vector<std::int32_t> mask(128, 0);
  std::fill_n(mask.begin(), 5, 1);
  CHECK(e.input_mask == mask);
  CHECK(e.input_type_ids == std::vector<std::int32_t>(128, 0));

  const auto empty = encode("", v);
  CHECK(empty.input_word_ids[0] == 2);
  CHECK(empty.input_word_ids[1] == 3);
  CHECK(empty.real_tokens() == 2);

  std::string long_text;
  for (int i = 0; i < 500; ++i) long_text += "taliban ";
  const auto t = encode(long_text, v);
  CHECK(std::accumulate(t.input_mask.begin(), t.input_mask.end(), 0) == 128);
  CHECK(t.input_word_ids[127] == 3);

  CHECK_THROWS_AS(encode("x", v, 1), DataError);
  CHECK(encode("taliban", v, 2).input_word_ids == std::vector<TokenId>{2, 3});
}

TEST_CASE("frozen conformance cases") {
  CHECK(kCases.size() == 21);
  for (const auto& c : kCases) {
    INFO("text: " << std::string(c.text));
    const auto e = encode(c.text, test_vocab(), c.max_len);
    check_invariants(e, c.max_len, test_vocab().size());
    const std::vector<TokenId> prefix(e.input_word_ids.begin(),
                                      e.input_word_ids.begin() + static_cast<std::ptrdiff_t>(e.real_tokens()));
    CHECK(prefix == c.prefix);
  }
}

TEST_CASE("encode invariants on random byte strings") {
  Rng rng(77);
  const auto& v = test_vocab();
  const std::string alphabet =
      "abcdefghijklmnopqrstuvwxyz ABCDEFGHIJKLMNOPQRSTUVWXYZ 0123456789 .,;:'\"()-!?\t\n";
  const std::vector<std::string> multibyte{"\xC3\xA9", "\xE2\x80\x94", "\xE6\x94\xBB",
                                           "\xF0\x9F\x98\x80", "\xCC\x81", "\xC2\xA0"};
  for (int trial = 0; trial < 300; ++trial) {
    std::string text;
    const auto len = rng.below(400);
    for (std::uint64_t i = 0; i < len; ++i) {
      const auto pick = rng.below(20);
      if (pick == 0) text += multibyte[rng.below(multibyte.size())];
      else if (pick == 1) text += static_cast<char>(rng.below(256));
      else text += alphabet[rng.below(alphabet.size())];
    }
    const auto max_len = trial % 3 == 0 ? std::size_t{16} : kDefaultMaxLen;
    const auto e = encode(text, v, max_len);
    check_invariants(e, max_len, v.size());
    const auto pieces = tokenize(text, v);
    CHECK(e.real_tokens() == std::min(max_len, pieces.size() + 2));
    CHECK(encode(text, v, max_len).input_word_ids == e.input_word_ids);
  }
}

TEST_CASE("in-vocabulary words round-trip through wordpiece") {
  const auto& v = test_vocab();
  for (std::size_t id = 4; id < v.size(); ++id) {
    const auto& tok = v.token(static_cast<TokenId>(id));
    if (tok.rfind("##", 0) == 0 || tok.front() == '[') continue;
    const auto norm = normalize(tok);
    if (norm.size() != 1 || norm[0] != tok) continue;
    const auto ids = wordpiece(tok, v);
    REQUIRE(ids.size() == 1);
    CHECK(v.token(ids[0]) == tok);
  }
  const auto pieces = wordpiece("kabul", v);
  std::string joined;
  for (auto id : pieces) {
    auto t = v.token(id);
    joined += t.rfind("##", 0) == 0 ? t.substr(2) : t;
  }
  CHECK(joined == "kabul");
}
