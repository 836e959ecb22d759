// SPDX-License-Identifier: Apache-2.0
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "seqtag/errors.hpp"
#include "seqtag/model.hpp"

namespace seqtag {

namespace {

static_assert(std::endian::native == std::endian::little,
              "model files are written in little-endian byte order");

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    buf_.append(s);
  }
  void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  std::string& bytes() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, sizeof v);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) throw FormatError("model payload ends inside a field");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

constexpr std::size_t kHeaderSize = 7 + 1 + 8;

}  // namespace

std::string serialize_model(const TaggerModel& model) {
  const ModelConfig& c = model.config();
  Writer payload;
  payload.str(to_string(c.variant));
  payload.u64(c.embedding_dim);
  payload.u64(c.hidden_dim);
  payload.f64(c.learning_rate);
  payload.u64(c.epochs);
  payload.u64(c.seed);
  payload.u64(c.kernel_width);
  payload.u64(c.conv_channels);
  payload.f64(c.clip_norm);

  const auto& tokens = model.vocab().tokens();
  payload.u64(tokens.size() - 2);
  for (std::size_t i = 2; i < tokens.size(); ++i) payload.str(tokens[i]);
  payload.u64(model.vocab().tag_count());
  for (const auto& t : model.vocab().tags()) payload.str(t);

  const ParamList params = model.parameters();
  payload.u64(params.size());
  for (const auto& slot : params) {
    const Tensor& v = slot.param->value;
    payload.str(slot.name);
    payload.u8(static_cast<std::uint8_t>(v.rank()));
    for (std::size_t d : v.shape()) payload.u64(d);
    payload.raw(v.data().data(), v.size() * sizeof(double));
  }

  Writer file;
  file.raw(kModelMagic.data(), kModelMagic.size());
  file.u8(kModelFormatVersion);
  file.u64(payload.bytes().size());
  file.bytes().append(payload.bytes());
  file.u32(crc_of(payload.bytes()));
  return std::move(file.bytes());
}

TaggerModel deserialize_model(std::string_view bytes) {
  const std::size_t magic_len = kModelMagic.size();
  const std::string_view head = bytes.substr(0, std::min(bytes.size(), magic_len));
  if (head != kModelMagic.substr(0, head.size())) {
    throw FormatError("not a model file (bad magic)");
  }
  if (bytes.size() < magic_len + 1) throw TruncationError("model file truncated in header");
  const auto version = static_cast<std::uint8_t>(bytes[magic_len]);
  if (version != kModelFormatVersion) {
    throw VersionError("unsupported model format version " + std::to_string(version) +
                       " (expected " + std::to_string(kModelFormatVersion) + ")");
  }
  if (bytes.size() < kHeaderSize) throw TruncationError("model file truncated in header");
  std::uint64_t payload_len;
  std::memcpy(&payload_len, bytes.data() + magic_len + 1, sizeof payload_len);
  if (bytes.size() - kHeaderSize < 4 || payload_len > bytes.size() - kHeaderSize - 4) {
    throw TruncationError("model file truncated: payload declares " +
                          std::to_string(payload_len) + " bytes");
  }
  const std::string_view payload = bytes.substr(kHeaderSize, payload_len);
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + kHeaderSize + payload_len, sizeof stored_crc);
  if (crc_of(payload) != stored_crc) throw ChecksumError("model file checksum mismatch");
  if (bytes.size() != kHeaderSize + payload_len + 4) {
    throw FormatError("unexpected bytes after model checksum");
  }

  Reader in(payload);
  ModelConfig c;
  const std::string variant = in.str();
  auto v = parse_variant(variant);
  if (!v) throw FormatError("model file names unknown variant '" + variant + "'");
  c.variant = *v;
  c.embedding_dim = in.u64();
  c.hidden_dim = in.u64();
  c.learning_rate = in.f64();
  c.epochs = in.u64();
  c.seed = in.u64();
  c.kernel_width = in.u64();
  c.conv_channels = in.u64();
  c.clip_norm = in.f64();

  std::vector<std::string> tokens(in.u64());
  for (auto& t : tokens) t = in.str();
  std::vector<std::string> tags(in.u64());
  for (auto& t : tags) t = in.str();

  TaggerModel model(c, Vocabulary(std::move(tokens), std::move(tags)));
  ParamList params = model.parameters();
  if (in.u64() != params.size()) throw FormatError("parameter block count does not match model");
  for (auto& slot : params) {
    Tensor& value = slot.param->value;
    if (in.str() != slot.name) throw FormatError("unexpected parameter block, wanted " + slot.name);
    std::vector<std::size_t> shape(in.u8());
    for (auto& d : shape) d = in.u64();
    if (shape != value.shape()) {
      throw FormatError("parameter " + slot.name + " has shape " + shape_string(shape) +
                        ", model expects " + shape_string(value.shape()));
    }
    in.raw(value.data().data(), value.size() * sizeof(double));
  }
  if (!in.done()) throw FormatError("trailing bytes in model payload");
  return model;
}

void save_model(const TaggerModel& model, const std::string& path) {
  const std::string bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write model file '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for model file '" + path + "'");
}

TaggerModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

}  // namespace seqtag
