#include "bragg/core.hpp"

#include <string>

#include <openssl/evp.h>

namespace bragg {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(seed) ^ (stream * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

AtomSpecies::AtomSpecies(double mass, double wavenumber, double hbar)
    : mass_(mass), wavenumber_(wavenumber), hbar_(hbar) {
  if (!(mass > 0.0) || !std::isfinite(mass)) throw ConfigError("atom mass must be positive");
  if (!(wavenumber > 0.0) || !std::isfinite(wavenumber))
    throw ConfigError("wavenumber must be positive");
  if (!(hbar > 0.0)) throw ConfigError("hbar must be positive");
}

AtomSpecies AtomSpecies::rubidium87() {
  return AtomSpecies(kRb87Mass, kTwoPi / kRbD2Wavelength);
}

double recoil_frequency(const AtomSpecies& species) {
  const double k = species.wavenumber();
  return species.hbar() * k * k / (2.0 * species.mass());
}

double generalized_detuning(int m, double delta_p, double delta, const AtomSpecies& species) {
  const double wr = recoil_frequency(species);
  const double x = 2.0 * m + delta_p + delta / (4.0 * wr);
  return wr * x * x;
}

double resonant_detuning(int order, double delta_p, const AtomSpecies& species) {
  if (order < 1) throw ConfigError("Bragg order must be >= 1");
  return -4.0 * recoil_frequency(species) * (order + delta_p);
}

BlochBasis::BlochBasis(int order, int m_min, int m_max)
    : order_(order), m_min_(m_min), m_max_(m_max) {
  if (order < 1) throw ConfigError("Bragg order must be >= 1");
  if (m_min > 0 || m_max < order)
    throw ConfigError("basis [" + std::to_string(m_min) + ", " + std::to_string(m_max) +
                      "] must contain both arms 0 and " + std::to_string(order));
}

BlochBasis BlochBasis::for_order(int order) { return BlochBasis(order, -order, 2 * order); }

int BlochBasis::index(int m) const {
  if (!contains(m))
    throw ConfigError("momentum index " + std::to_string(m) + " outside basis");
  return m - m_min_;
}

BlochBasis BlochBasis::enlarged(int extra_per_side) const {
  return BlochBasis(order_, m_min_ - extra_per_side, m_max_ + extra_per_side);
}

}  // namespace bragg
