#pragma once

#include <filesystem>
#include <string>

namespace hpcaas {

/// RSA keypair the gateway uses to log into the master node. The operator
/// appends `public_key_line()` to the master's ~/.ssh/authorized_keys.
///
/// The private key lives in `<dir>/gateway_rsa` (mode 0600, PEM); the public
/// half is always re-derived from it, never stored separately.
class GatewayKeypair {
 public:
  /// Loads the key from `dir`, generating and persisting one if absent.
  static GatewayKeypair load_or_generate(const std::filesystem::path& dir, int bits = 3072);

  const std::string& algorithm() const noexcept { return algorithm_; }

  /// Single-line authorized_keys entry: "ssh-rsa <base64> hpcaas-gateway".
  const std::string& public_key_line() const noexcept { return public_line_; }

  const std::filesystem::path& private_key_path() const noexcept { return private_path_; }

 private:
  std::string algorithm_;
  std::string public_line_;
  std::filesystem::path private_path_;
};

/// authorized_keys line for an RSA private key in PEM form. Throws Integrity
/// if the PEM does not hold an RSA key.
std::string rsa_public_key_line(const std::string& private_pem, const std::string& comment);

}  // namespace hpcaas
