#include "elastoflow/phantom.hpp"

#include <cmath>
#include <stdexcept>

#include "detail/bilinear.hpp"
#include "elastoflow/rng.hpp"

namespace elastoflow::phantom {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kFwhmSigmas = 2.0 * 1.1774100225154747;  // 2*sqrt(2 ln 2)
}  // namespace

double PsfParams::axial_sigma_mm(const ImagingGrid& grid) const {
  // Gaussian pulse whose -6 dB spectral width is frac_bandwidth * f0,
  // mapped to depth via z = c t / 2.
  const double sigma_t = kFwhmSigmas / (2.0 * kPi * frac_bandwidth * grid.center_freq_hz);
  return sigma_t * grid.speed_of_sound_m_s * 1000.0 / 2.0;
}

double PsfParams::lateral_sigma_mm(const ImagingGrid& grid) const {
  return lateral_sigma_pitches * grid.lateral_pitch_mm;
}

double resolution_cell_mm2(const PsfParams& psf, const ImagingGrid& grid) {
  return (kFwhmSigmas * psf.axial_sigma_mm(grid)) * (kFwhmSigmas * psf.lateral_sigma_mm(grid));
}

double default_resolution_cell_mm2() { return resolution_cell_mm2(PsfParams{}, ImagingGrid{}); }

ScattererField generate_scatterers(const PhantomExtent& extent, double density_per_mm2,
                                   uint64_t seed, double cell_mm2) {
  if (density_per_mm2 <= 0.0) throw std::invalid_argument("generate_scatterers: density must be > 0");
  if (extent.axial_mm <= 0.0 || extent.lateral_mm <= 0.0)
    throw std::invalid_argument("generate_scatterers: extent must be positive");

  const auto n = static_cast<size_t>(std::llround(density_per_mm2 * extent.area_mm2()));
  ScattererField field;
  field.extent = extent;
  field.density_per_mm2 = density_per_mm2;
  field.axial_mm.reserve(n);
  field.lateral_mm.reserve(n);
  field.amplitudes.reserve(n);

  Rng rng(seed);
  for (size_t i = 0; i < n; ++i) {
    field.axial_mm.push_back(rng.uniform(0.0, extent.axial_mm));
    field.lateral_mm.push_back(rng.uniform(0.0, extent.lateral_mm));
    field.amplitudes.push_back(rng.normal());
  }

  const double per_cell = density_per_mm2 * cell_mm2;
  if (per_cell < kMinSpeckleDensityPerCell) {
    field.warning = "scatterer density " + std::to_string(per_cell) +
                    " per resolution cell is below the fully-developed-speckle threshold " +
                    std::to_string(kMinSpeckleDensityPerCell);
  }
  return field;
}

RfFrame render_rf(const ScattererField& scatterers, const PsfParams& psf, const ImagingGrid& grid,
                  const std::string& frame_id) {
  const double step = grid.axial_step_mm();
  const double pitch = grid.lateral_pitch_mm;
  const double sz = psf.axial_sigma_mm(grid);
  const double sx = psf.lateral_sigma_mm(grid);
  const double support_z = psf.support_sigmas * sz;
  const double support_x = psf.support_sigmas * sx;
  if (2.0 * support_z >= grid.depth_mm() || 2.0 * support_x >= grid.width_mm())
    throw std::invalid_argument("render_rf: PSF support exceeds the phantom extent");

  const double carrier_per_mm = 2.0 * grid.center_freq_hz / (grid.speed_of_sound_m_s * 1000.0);
  const int64_t A = grid.axial_samples, L = grid.lateral_lines;
  Tensor samples({A, L});

  std::vector<double> ax_profile, lat_profile;
  for (size_t s = 0; s < scatterers.count(); ++s) {
    const double zc = scatterers.axial_mm[s];
    const double xc = scatterers.lateral_mm[s];
    const double amp = scatterers.amplitudes[s];

    const int64_t i0 = std::max<int64_t>(0, static_cast<int64_t>(std::ceil((zc - support_z) / step)));
    const int64_t i1 = std::min<int64_t>(A - 1, static_cast<int64_t>(std::floor((zc + support_z) / step)));
    const int64_t j0 = std::max<int64_t>(0, static_cast<int64_t>(std::ceil((xc - support_x) / pitch)));
    const int64_t j1 = std::min<int64_t>(L - 1, static_cast<int64_t>(std::floor((xc + support_x) / pitch)));
    if (i0 > i1 || j0 > j1) continue;

    ax_profile.clear();
    for (int64_t i = i0; i <= i1; ++i) {
      const double dz = static_cast<double>(i) * step - zc;
      ax_profile.push_back(std::exp(-dz * dz / (2.0 * sz * sz)) *
                           std::cos(2.0 * kPi * carrier_per_mm * dz));
    }
    lat_profile.clear();
    for (int64_t j = j0; j <= j1; ++j) {
      const double dx = static_cast<double>(j) * pitch - xc;
      lat_profile.push_back(std::exp(-dx * dx / (2.0 * sx * sx)));
    }
    for (int64_t i = i0; i <= i1; ++i) {
      const double av = amp * ax_profile[static_cast<size_t>(i - i0)];
      for (int64_t j = j0; j <= j1; ++j)
        samples.at(i, j) += av * lat_profile[static_cast<size_t>(j - j0)];
    }
  }
  return make_rf_frame(std::move(samples), grid.sampling_freq_hz, grid.center_freq_hz, frame_id);
}

void validate(const GroundTruthDeformation& d) {
  if (d.kind == DeformationKind::custom_grid) {
    if (!d.grid) throw std::invalid_argument("deformation: custom_grid requires a grid");
    validate(*d.grid);
    return;
  }
  if (d.enforce_strain_range) {
    const double s = std::abs(d.axial_strain);
    if (s != 0.0 && (s < 0.005 || s > 0.05))
      throw std::invalid_argument(
          "deformation: |axial_strain| outside the supported range [0.005, 0.05]");
  }
  if (d.kind == DeformationKind::inclusion) {
    if (!d.inclusion || d.inclusion->radius_mm <= 0.0)
      throw std::invalid_argument("deformation: inclusion requires a positive radius");
    if (d.inclusion->strain_ratio < 0.0)
      throw std::invalid_argument("deformation: strain_ratio must be nonnegative");
  }
}

Displacement2 displacement_at(const GroundTruthDeformation& d, double z_mm, double x_mm,
                              const ImagingGrid& grid) {
  switch (d.kind) {
    case DeformationKind::uniform_strain:
      return {d.axial_strain * z_mm, 0.0};
    case DeformationKind::inclusion: {
      const InclusionSpec& inc = *d.inclusion;
      const double s_bg = d.axial_strain;
      const double s_in = inc.strain_ratio * s_bg;
      // Column-wise integral of the piecewise strain profile: background
      // everywhere except the chord the column cuts through the inclusion.
      const double dx = x_mm - inc.center_lateral_mm;
      double overlap = 0.0;
      if (std::abs(dx) < inc.radius_mm) {
        const double half = std::sqrt(inc.radius_mm * inc.radius_mm - dx * dx);
        const double z1 = inc.center_axial_mm - half;
        const double z2 = inc.center_axial_mm + half;
        overlap = std::max(0.0, std::min(z_mm, z2) - std::max(0.0, z1));
      }
      return {s_bg * z_mm + (s_in - s_bg) * overlap, 0.0};
    }
    case DeformationKind::custom_grid: {
      const DisplacementField& g = *d.grid;
      const double ri = z_mm / grid.axial_step_mm();
      const double cj = x_mm / grid.lateral_pitch_mm;
      const detail::Bilinear b = detail::locate(ri, cj, g.rows(), g.cols());
      return {detail::sample(g.axial, b) * grid.axial_step_mm(),
              detail::sample(g.lateral, b) * grid.lateral_pitch_mm};
    }
  }
  return {};
}

DeformedPair deform_and_render(const ScattererField& scatterers,
                               const GroundTruthDeformation& deformation, const PsfParams& psf,
                               const ImagingGrid& grid, const std::string& frame_id) {
  validate(deformation);

  ScattererField moved = scatterers;
  for (size_t s = 0; s < moved.count(); ++s) {
    const Displacement2 u =
        displacement_at(deformation, scatterers.axial_mm[s], scatterers.lateral_mm[s], grid);
    moved.axial_mm[s] += u.axial_mm;
    moved.lateral_mm[s] += u.lateral_mm;
  }

  DeformedPair out{render_rf(moved, psf, grid, frame_id),
                   DisplacementField::zeros(grid.axial_samples, grid.lateral_lines)};
  const double step = grid.axial_step_mm();
  const double pitch = grid.lateral_pitch_mm;
  for (int64_t i = 0; i < grid.axial_samples; ++i)
    for (int64_t j = 0; j < grid.lateral_lines; ++j) {
      const Displacement2 u = displacement_at(deformation, static_cast<double>(i) * step,
                                              static_cast<double>(j) * pitch, grid);
      out.truth.axial.at(i, j) = u.axial_mm / step;
      out.truth.lateral.at(i, j) = u.lateral_mm / pitch;
    }
  return out;
}

PhantomPair make_phantom_pair(const ImagingGrid& grid, const PsfParams& psf,
                              const GroundTruthDeformation& deformation, double density_per_mm2,
                              uint64_t seed, const std::string& id_prefix) {
  PhantomPair pair;
  pair.scatterers = generate_scatterers(PhantomExtent::of(grid), density_per_mm2, seed,
                                        resolution_cell_mm2(psf, grid));
  pair.frame1 = render_rf(pair.scatterers, psf, grid, id_prefix + "_a");
  DeformedPair d = deform_and_render(pair.scatterers, deformation, psf, grid, id_prefix + "_b");
  pair.frame2 = std::move(d.frame);
  pair.truth = std::move(d.truth);
  return pair;
}

}  // namespace elastoflow::phantom
