#include "xpasc/digest.hpp"

#include "xpasc/common.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

namespace xpasc {

namespace {

struct DigestContext {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), &EVP_MD_CTX_free};

  DigestContext() {
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
      throw Error("sha256: cannot initialise digest context");
    }
  }

  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx.get(), data, n); }

  std::string finish() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
      out.push_back(kHex[md[i] >> 4]);
      out.push_back(kHex[md[i] & 0xF]);
    }
    return out;
  }
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  DigestContext d;
  d.update(bytes.data(), bytes.size());
  return d.finish();
}

std::string file_sha256_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string() + " for hashing");
  DigestContext d;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    d.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return d.finish();
}

std::string sequence_digest(std::span<const std::string> items) {
  DigestContext d;
  for (const auto& s : items) {
    const std::string prefix = std::to_string(s.size()) + ":";
    d.update(prefix.data(), prefix.size());
    d.update(s.data(), s.size());
  }
  return d.finish();
}

}  // namespace xpasc
