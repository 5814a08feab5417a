#include "hpcaas/keypair.hpp"

#include <openssl/bio.h>
#include <openssl/bn.h>
#include <openssl/core_names.h>
#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/rsa.h>

#include <memory>
#include <vector>

#include "hpcaas/error.hpp"
#include "hpcaas/record_store.hpp"

namespace hpcaas {

namespace {

struct BioFree {
  void operator()(BIO* b) const { BIO_free(b); }
};
struct PkeyFree {
  void operator()(EVP_PKEY* k) const { EVP_PKEY_free(k); }
};
struct BnFree {
  void operator()(BIGNUM* b) const { BN_free(b); }
};
using BioPtr = std::unique_ptr<BIO, BioFree>;
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyFree>;
using BnPtr = std::unique_ptr<BIGNUM, BnFree>;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

void put_string(std::vector<unsigned char>& out, const unsigned char* data, std::size_t len) {
  put_u32(out, static_cast<std::uint32_t>(len));
  out.insert(out.end(), data, data + len);
}

// SSH mpint: big-endian two's complement, minimal length.
void put_mpint(std::vector<unsigned char>& out, const BIGNUM* bn) {
  std::vector<unsigned char> bytes(static_cast<std::size_t>(BN_num_bytes(bn)));
  BN_bn2bin(bn, bytes.data());
  if (!bytes.empty() && (bytes.front() & 0x80)) bytes.insert(bytes.begin(), 0x00);
  put_string(out, bytes.data(), bytes.size());
}

BnPtr get_bn(EVP_PKEY* key, const char* name) {
  BIGNUM* bn = nullptr;
  if (EVP_PKEY_get_bn_param(key, name, &bn) != 1) {
    fail(ErrorCode::Integrity, std::string("RSA key lacks parameter ") + name);
  }
  return BnPtr(bn);
}

std::string base64(const std::vector<unsigned char>& data) {
  std::string out(4 * ((data.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(),
                                static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string generate_pem(int bits) {
  PkeyPtr key(EVP_RSA_gen(static_cast<unsigned>(bits)));
  if (!key) fail(ErrorCode::Io, "RSA key generation failed");
  BioPtr bio(BIO_new(BIO_s_mem()));
  if (PEM_write_bio_PrivateKey(bio.get(), key.get(), nullptr, nullptr, 0, nullptr, nullptr) != 1) {
    fail(ErrorCode::Io, "cannot encode RSA private key");
  }
  char* data = nullptr;
  const long len = BIO_get_mem_data(bio.get(), &data);
  return std::string(data, static_cast<std::size_t>(len));
}

}  // namespace

std::string rsa_public_key_line(const std::string& private_pem, const std::string& comment) {
  BioPtr bio(BIO_new_mem_buf(private_pem.data(), static_cast<int>(private_pem.size())));
  PkeyPtr key(PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr, nullptr));
  if (!key || !EVP_PKEY_is_a(key.get(), "RSA")) {
    fail(ErrorCode::Integrity, "gateway private key is not a readable RSA key");
  }
  const BnPtr e = get_bn(key.get(), OSSL_PKEY_PARAM_RSA_E);
  const BnPtr n = get_bn(key.get(), OSSL_PKEY_PARAM_RSA_N);

  static constexpr std::string_view kType = "ssh-rsa";
  std::vector<unsigned char> blob;
  put_string(blob, reinterpret_cast<const unsigned char*>(kType.data()), kType.size());
  put_mpint(blob, e.get());
  put_mpint(blob, n.get());
  return std::string(kType) + " " + base64(blob) + " " + comment;
}

GatewayKeypair GatewayKeypair::load_or_generate(const std::filesystem::path& dir, int bits) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create key directory '" + dir.string() + "': " + ec.message());

  GatewayKeypair kp;
  kp.algorithm_ = "ssh-rsa";
  kp.private_path_ = dir / "gateway_rsa";
  std::string pem;
  if (std::filesystem::exists(kp.private_path_)) {
    pem = read_file(kp.private_path_);
  } else {
    pem = generate_pem(bits);
    write_file_atomically(kp.private_path_, pem, 0600);
  }
  kp.public_line_ = rsa_public_key_line(pem, "hpcaas-gateway");
  return kp;
}

}  // namespace hpcaas
