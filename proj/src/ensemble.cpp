#include "bipolar/ensemble.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace bipolar {

std::size_t default_workers() {
  const char* env = std::getenv("BIPOLAR_WORKERS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  if (*end != '\0' || v == 0) return 1;
  return static_cast<std::size_t>(v);
}

InitialLaw InitialLaw::fixed(SpectralField point) {
  InitialLaw law;
  law.kind_ = Kind::Fixed;
  law.point_ = std::move(point);
  return law;
}

InitialLaw InitialLaw::gaussian(int dim, std::size_t modes, double scale, double decay) {
  if (modes == 0) throw std::invalid_argument("gaussian initial law needs at least one mode");
  if (!(scale >= 0)) throw std::invalid_argument("gaussian initial law needs scale >= 0");
  const GalerkinBasis basis = build_basis(modes, dim);
  InitialLaw law;
  law.kind_ = Kind::Gaussian;
  law.scale_ = scale;
  law.decay_ = decay;
  law.profile_.resize(modes);
  for (std::size_t i = 0; i < modes; ++i) {
    law.profile_[i] = scale * std::pow(basis.eigenvalue(0) / basis.eigenvalue(i), decay);
  }
  return law;
}

SpectralField InitialLaw::draw(std::size_t level, std::uint64_t root, std::size_t path) const {
  if (kind_ == Kind::Fixed) {
    if (point_.level() == 0) return SpectralField(level);
    return point_.level() >= level ? project(point_, level) : prolong(point_, level);
  }
  Stream stream(root, StreamPurpose::Initial, path);
  SpectralField full(profile_.size());
  for (std::size_t i = 0; i < profile_.size(); ++i) full[i] = profile_[i] * stream.normal();
  return full.level() >= level ? project(full, level) : prolong(full, level);
}

void EnsembleSpec::validate() const {
  if (paths < 2) throw std::invalid_argument("ensemble needs at least 2 paths, got " + std::to_string(paths));
  if (workers == 0) throw std::invalid_argument("ensemble needs at least one worker");
}

}  // namespace bipolar
