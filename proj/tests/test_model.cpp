// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "gradcheck.hpp"
#include "seqtag/errors.hpp"
#include "seqtag/model.hpp"

using namespace seqtag;

namespace {

ModelConfig small_config(Variant v, std::uint64_t seed = 7) {
  ModelConfig c;
  c.variant = v;
  c.embedding_dim = 4;
  c.hidden_dim = 4;
  c.conv_channels = 4;
  c.seed = seed;
  return c;
}

Vocabulary tiny_vocab(std::size_t tokens, std::size_t tags) {
  std::vector<std::string> tok, tg;
  for (std::size_t i = 0; i < tokens; ++i) tok.push_back("w" + std::to_string(i));
  for (std::size_t i = 0; i < tags; ++i) tg.push_back(i == 0 ? "O" : "T" + std::to_string(i));
  return Vocabulary(tok, tg);
}

std::vector<Tensor> snapshot(TaggerModel& m) {
  std::vector<Tensor> out;
  for (const auto& slot : m.parameters()) out.push_back(slot.param->value);
  return out;
}

}  // namespace

TEST_CASE("variant names") {
  for (Variant v : kAllVariants) CHECK(parse_variant(to_string(v)) == v);
  CHECK_FALSE(parse_variant("transformer_crf").has_value());
  CHECK(display_name(Variant::bigru_cnn_crf) == "Bidirectional GRU+CNN-CRF");
  CHECK(variant_names().find("bigru_cnn_crf") != std::string::npos);
}

TEST_CASE("default configuration carries the published hyperparameters") {
  const ModelConfig c;
  CHECK(c.embedding_dim == 128);
  CHECK(c.hidden_dim == 128);
  CHECK(c.learning_rate == 0.005);
  CHECK(c.epochs == 20);
  CHECK(c.kernel_width == 3);
  CHECK(c.conv_channels == 128);
}

TEST_CASE("build_model") {
  SUBCASE("parameter count audit for bigru_cnn_crf, V=100, K=5") {
    ModelConfig c;
    c.variant = Variant::bigru_cnn_crf;
    TaggerModel m = build_model(c, tiny_vocab(98, 5));
    // V*D + 2 dirs * 3 gates * ((D+H)*H + H) + (3*2H*C + C) + (C*K + K) + (K+2)^2
    //   = 12800 + 197376 + 98432 + 645 + 49
    const std::size_t V = 100, D = 128, H = 128, C = 128, K = 5;
    const std::size_t formula =
        V * D + 2 * 3 * ((D + H) * H + H) + (3 * 2 * H * C + C) + (C * K + K) + (K + 2) * (K + 2);
    CHECK(formula == 309302);
    CHECK(m.parameter_count() == 309302);
  }
  SUBCASE("crf_only has no recurrent or conv stage") {
    TaggerModel m = build_model(small_config(Variant::crf_only), tiny_vocab(5, 3));
    CHECK_FALSE(m.has_recurrent());
    CHECK_FALSE(m.has_conv());
    CHECK(m.parameters().size() == 4);  // embedding, projection w/b, transitions
  }
  SUBCASE("stage wiring per variant") {
    for (Variant v : kAllVariants) {
      TaggerModel m = build_model(small_config(v), tiny_vocab(5, 3));
      CHECK(m.has_conv() == uses_conv(v));
      CHECK(m.has_recurrent() == recurrent_kind(v).has_value());
    }
  }
  SUBCASE("same seed, same model") {
    const std::vector<std::size_t> ids{2, 3, 4}, tags{0, 1, 2};
    for (Variant v : kAllVariants) {
      TaggerModel a = build_model(small_config(v), tiny_vocab(5, 3));
      TaggerModel b = build_model(small_config(v), tiny_vocab(5, 3));
      CHECK(a.loss(ids, tags) == b.loss(ids, tags));
      CHECK(snapshot(a) == snapshot(b));
      TaggerModel c = build_model(small_config(v, 8), tiny_vocab(5, 3));
      CHECK(snapshot(a) != snapshot(c));
    }
  }
  SUBCASE("bad configuration") {
    ModelConfig c = small_config(Variant::cnn_crf);
    c.kernel_width = 4;
    CHECK_THROWS_AS(build_model(c, tiny_vocab(5, 3)), ConfigError);
    c = small_config(Variant::cnn_crf);
    c.variant = static_cast<Variant>(42);
    CHECK_THROWS_AS(build_model(c, tiny_vocab(5, 3)), ConfigError);
    CHECK_THROWS_AS(build_model(small_config(Variant::crf_only), tiny_vocab(5, 0)), ArgumentError);
  }
}

TEST_CASE("end-to-end gradients for every variant") {
  Rng rng(11);
  std::uniform_int_distribution<std::size_t> tok(kUnkId, 6), tag(0, 2);
  for (Variant v : kAllVariants) {
    CAPTURE(to_string(v));
    testing::GradCheck gc;
    for (int trial = 0; trial < 20; ++trial) {
      TaggerModel m = build_model(small_config(v, 100 + trial), tiny_vocab(5, 3));
      // Biases start at zero; randomize so the check covers generic points.
      for (auto& slot : m.parameters()) {
        if (slot.name.find(".b") != std::string::npos && slot.name.find("embedding") == std::string::npos) {
          slot.param->value = testing::random_tensor(slot.param->value.shape(), rng, 0.5);
        }
      }
      std::vector<std::size_t> ids(3), gold(3);
      for (auto& i : ids) i = tok(rng);
      for (auto& g : gold) g = tag(rng);
      m.zero_grad();
      m.loss_and_backward(ids, gold);
      ParamList params = m.parameters();
      testing::check_params(params, [&] { return m.loss(ids, gold); }, gc,
                            [&](const ParamSlot& slot, std::size_t i) {
                              return slot.param == &m.crf().transitions &&
                                     m.crf().is_forbidden(i / 5, i % 5);
                            });
      for (std::size_t j = 0; j < 4; ++j) CHECK(m.embedding().table.grad(kPadId, j) == 0.0);
    }
    CHECK_MESSAGE(gc.ok(), gc.worst);
  }
}

TEST_CASE("gradient clipping and SGD step") {
  Parameter p({3});
  p.grad = Tensor::from_values({3.0, 4.0, 0.0});
  ParamList list{{"p", &p, nullptr}};
  CHECK(clip_gradients(list, 10.0) == doctest::Approx(5.0));
  CHECK(p.grad == Tensor::from_values({3.0, 4.0, 0.0}));
  clip_gradients(list, 1.0);
  CHECK(p.grad[0] == doctest::Approx(0.6));
  CHECK(p.grad[1] == doctest::Approx(0.8));
  sgd_step(list, 0.5);
  CHECK(p.value[0] == doctest::Approx(-0.3));

  // Row-sparse slots only touch the listed rows.
  Parameter table({3, 2});
  table.grad.fill(1.0);
  std::vector<std::size_t> rows{1};
  ParamList sparse{{"t", &table, &rows}};
  CHECK(clip_gradients(sparse, 100.0) == doctest::Approx(std::sqrt(2.0)));
  sgd_step(sparse, 1.0);
  CHECK(table.value(0, 0) == 0.0);
  CHECK(table.value(1, 0) == -1.0);
}

TEST_CASE("training contracts") {
  const auto corpus = generate_synthetic_corpus(3, 120, 30, 3);
  const DatasetSplit split = split_dataset(corpus, SplitSpec{});
  const Vocabulary vocab = build_vocab(corpus);

  SUBCASE("zero learning rate leaves parameters and loss unchanged") {
    ModelConfig c = small_config(Variant::gru_crf);
    c.learning_rate = 0.0;
    c.epochs = 3;
    TaggerModel m = build_model(c, vocab);
    const auto before = snapshot(m);
    const TrainingReport r = train(m, split.train, split.val);
    CHECK(snapshot(m) == before);
    REQUIRE(r.epochs.size() == 3);
    // Sums run in shuffled order, so only rounding may differ.
    CHECK(r.epochs[1].train_loss == doctest::Approx(r.epochs[0].train_loss).epsilon(1e-12));
    CHECK(r.epochs[2].train_loss == doctest::Approx(r.epochs[0].train_loss).epsilon(1e-12));
  }
  SUBCASE("bit-reproducible with a fixed seed") {
    ModelConfig c = small_config(Variant::bigru_cnn_crf);
    c.epochs = 2;
    c.embedding_dim = c.hidden_dim = c.conv_channels = 8;
    TaggerModel a = build_model(c, vocab);
    TaggerModel b = build_model(c, vocab);
    const auto ra = train(a, split.train, split.val);
    const auto rb = train(b, split.train, split.val);
    CHECK(snapshot(a) == snapshot(b));
    for (std::size_t e = 0; e < ra.epochs.size(); ++e) CHECK(ra.epochs[e].train_loss == rb.epochs[e].train_loss);
  }
  SUBCASE("losses are finite and fall to the best epoch") {
    ModelConfig c = small_config(Variant::bigru_cnn_crf);
    c.epochs = 6;
    c.embedding_dim = c.hidden_dim = c.conv_channels = 16;
    TaggerModel m = build_model(c, vocab);
    std::vector<std::size_t> seen;
    const auto r = train(m, split.train, split.val, [&](const EpochRecord& e) { seen.push_back(e.epoch); });
    CHECK(seen == std::vector<std::size_t>{1, 2, 3, 4, 5, 6});
    for (const auto& e : r.epochs) CHECK(std::isfinite(e.train_loss));
    REQUIRE(r.best_epoch >= 1);
    CHECK(r.epochs[r.best_epoch - 1].train_loss <= r.epochs[0].train_loss);
    CHECK(r.epochs.back().train_loss < r.epochs.front().train_loss);
    // The restored parameters reproduce the best epoch's validation score.
    const TagCounts counts = count_predictions(m, split.val);
    CHECK(weighted_average(counts).weighted.f1 == doctest::Approx(r.epochs[r.best_epoch - 1].val_f1));
  }
  SUBCASE("unknown tag is a data error naming the tag") {
    TaggerModel m = build_model(small_config(Variant::crf_only), vocab);
    std::vector<TaggedSentence> bad{{{"c1w1"}, {"NOPE"}}};
    try {
      train(m, bad, split.val);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("NOPE") != std::string::npos);
    }
    CHECK_THROWS_AS(train(m, {}, split.val), ArgumentError);
  }
}

TEST_CASE("predict") {
  const auto corpus = generate_synthetic_corpus(4, 50, 20, 4);
  TaggerModel m = build_model(small_config(Variant::bigru_crf), build_vocab(corpus));
  Rng rng(5);
  std::uniform_int_distribution<std::size_t> len(1, 15), pick(0, 40);
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::string> tokens(len(rng));
    for (auto& t : tokens) t = pick(rng) < 20 ? "c" + std::to_string(pick(rng) % 4) + "w" + std::to_string(pick(rng)) : "never-seen";
    const auto tags = m.predict(tokens);
    CHECK(tags.size() == tokens.size());
    for (const auto& t : tags) CHECK(m.vocab().has_tag(t));
    if (i % 100 == 0) CHECK(m.predict(tokens) == tags);
  }
  CHECK_THROWS_AS(m.predict({}), ArgumentError);
}

TEST_CASE("save and load") {
  const auto corpus = generate_synthetic_corpus(5, 60, 20, 4);
  for (Variant v : kAllVariants) {
    TaggerModel m = build_model(small_config(v), build_vocab(corpus));
    const std::string bytes = serialize_model(m);
    CHECK(bytes.substr(0, 7) == "SEQTAG1");
    CHECK(static_cast<int>(bytes[7]) == 1);
    TaggerModel back = deserialize_model(bytes);
    CHECK(back.config() == m.config());
    CHECK(back.vocab() == m.vocab());
    CHECK(snapshot(back) == snapshot(m));
    CHECK(serialize_model(back) == bytes);
    for (std::size_t i = 0; i < 50; ++i) CHECK(back.predict(corpus[i].tokens) == m.predict(corpus[i].tokens));
  }

  TaggerModel m = build_model(small_config(Variant::gru_crf), build_vocab(corpus));
  const std::string bytes = serialize_model(m);
  SUBCASE("corrupted payload byte") {
    std::string bad = bytes;
    bad[bad.size() / 2] ^= 0x20;
    CHECK_THROWS_AS(deserialize_model(bad), ChecksumError);
  }
  SUBCASE("corrupted checksum") {
    std::string bad = bytes;
    bad.back() ^= 0x01;
    CHECK_THROWS_AS(deserialize_model(bad), ChecksumError);
  }
  SUBCASE("wrong magic") {
    std::string bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(deserialize_model(bad), FormatError);
    CHECK_THROWS_AS(deserialize_model("hello world, not a model"), FormatError);
  }
  SUBCASE("version mismatch") {
    std::string bad = bytes;
    bad[7] = 2;
    CHECK_THROWS_AS(deserialize_model(bad), VersionError);
  }
  SUBCASE("truncation") {
    CHECK_THROWS_AS(deserialize_model(bytes.substr(0, bytes.size() - 10)), TruncationError);
    CHECK_THROWS_AS(deserialize_model(bytes.substr(0, 12)), TruncationError);
    CHECK_THROWS_AS(deserialize_model(bytes.substr(0, 5)), TruncationError);
  }
  SUBCASE("file round trip") {
    const std::string path = "test_model_roundtrip.model";
    save_model(m, path);
    TaggerModel back = load_model(path);
    CHECK(snapshot(back) == snapshot(m));
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_model("does/not/exist.model"), Error);
  }
}
