// Winner-takes-all separation: every time-frequency point of the full
// spectrogram is assigned to the mixture component with the smallest
// directional distance, each source is rebuilt as the projection of the
// mixture onto its component mean, and the result goes back through the
// inverse STFT.
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "dirsep/audio.hpp"
#include "dirsep/em.hpp"
#include "dirsep/errors.hpp"
#include "dirsep/sparsify.hpp"
#include "dirsep/stft.hpp"

namespace dirsep {

struct AssignmentMap {
    std::size_t frames = 0;
    std::size_t bins = 0;
    std::vector<std::uint32_t> source;  // component index per (t, f), 0-based
    std::size_t tie_count = 0;

    std::uint32_t at(std::size_t t, std::size_t f) const { return source[t * bins + f]; }

    std::vector<std::size_t> per_source_counts(std::size_t n_sources) const {
        std::vector<std::size_t> counts(n_sources, 0);
        for (std::uint32_t s : source) ++counts[s];
        return counts;
    }
};

struct SeparatedSources {
    std::vector<AudioBuffer> buffers;  // one mono buffer per source
    WmdldModel model;
};

// Assigns each (t, f) by the sum of directional distances of its normalized
// real-part and imaginary-part vectors, so both halves of one point land in
// the same source. Parts below the 1e-9 norm floor contribute nothing, and a
// point with no usable part goes to source 0 (it carries no energy). Exact
// ties go to the lowest component index and are counted.
inline AssignmentMap assign_points(const Spectrogram& spec, const WmdldModel& model) {
    model.validate();
    if (model.dimension != spec.channels)
        throw dimension_error("assign_points: model dimension must equal channel count");

    const std::size_t K = spec.channels;
    const std::size_t R = model.component_count();
    AssignmentMap map;
    map.frames = spec.frames;
    map.bins = spec.bins;
    map.source.assign(spec.frames * spec.bins, 0);

    std::vector<double> re(K), im(K), score(R);
    for (std::size_t t = 0; t < spec.frames; ++t) {
        for (std::size_t f = 0; f < spec.bins; ++f) {
            double re_nrm2 = 0.0, im_nrm2 = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                const std::complex<double> v = spec.at(k, t, f);
                re[k] = v.real();
                im[k] = v.imag();
                re_nrm2 += re[k] * re[k];
                im_nrm2 += im[k] * im[k];
            }
            const double re_nrm = std::sqrt(re_nrm2);
            const double im_nrm = std::sqrt(im_nrm2);
            const bool use_re = re_nrm >= 1e-9;
            const bool use_im = im_nrm >= 1e-9;
            if (!use_re && !use_im) continue;  // zero-energy point stays at source 0

            if (use_re)
                for (std::size_t k = 0; k < K; ++k) re[k] /= re_nrm;
            if (use_im)
                for (std::size_t k = 0; k < K; ++k) im[k] /= im_nrm;

            for (std::size_t i = 0; i < R; ++i) {
                const std::vector<double>& m = model.components[i].params.mean;
                double s = 0.0;
                if (use_re) s += directional_distance(re, m);
                if (use_im) s += directional_distance(im, m);
                score[i] = s;
            }
            std::size_t best = 0;
            bool tied = false;
            for (std::size_t i = 1; i < R; ++i) {
                if (score[i] < score[best]) {
                    best = i;
                    tied = false;
                } else if (score[i] == score[best]) {
                    tied = true;
                }
            }
            map.source[t * spec.bins + f] = static_cast<std::uint32_t>(best);
            if (tied) ++map.tie_count;
        }
    }
    return map;
}

// Per source i builds U_i(t, f) = m_i' X(t, f) on its assigned points and
// zero elsewhere, then inverts to the time domain. The real mean acts on the
// real and imaginary parts alike.
inline SeparatedSources reconstruct(const Spectrogram& spec, const AssignmentMap& assignment,
                                    const WmdldModel& model) {
    model.validate();
    if (model.dimension != spec.channels)
        throw dimension_error("reconstruct: model dimension must equal channel count");
    if (assignment.frames != spec.frames || assignment.bins != spec.bins)
        throw dimension_error("reconstruct: assignment does not cover the spectrogram");

    const std::size_t K = spec.channels;
    const std::size_t R = model.component_count();

    SeparatedSources out;
    out.model = model;
    out.buffers.reserve(R);

    Spectrogram mono;
    mono.channels = 1;
    mono.frames = spec.frames;
    mono.bins = spec.bins;
    mono.config = spec.config;
    mono.sample_rate = spec.sample_rate;
    mono.original_length = spec.original_length;

    for (std::size_t i = 0; i < R; ++i) {
        const std::vector<double>& m = model.components[i].params.mean;
        mono.values.assign(spec.frames * spec.bins, {0.0, 0.0});
        for (std::size_t t = 0; t < spec.frames; ++t) {
            for (std::size_t f = 0; f < spec.bins; ++f) {
                if (assignment.at(t, f) != i) continue;
                std::complex<double> proj{0.0, 0.0};
                for (std::size_t k = 0; k < K; ++k) proj += m[k] * spec.at(k, t, f);
                mono.at(0, t, f) = proj;
            }
        }
        out.buffers.push_back(istft(mono));
    }
    return out;
}

struct SeparationDiagnostics {
    AssignmentMap assignment;
    std::size_t selected_points = 0;
    double effective_threshold = 0.0;
};

// Full pipeline: STFT, confidence-based point selection, EM fit with L
// components, winner-takes-all assignment of every point, reconstruction.
// When the sparsifier config leaves min_points at 0 the pipeline uses the
// default floor of 100 points per source.
inline SeparatedSources separate(const AudioBuffer& mixture, std::size_t L,
                                 const StftConfig& stft_cfg, const SparsifierConfig& sparse_cfg,
                                 const EmConfig& em_cfg, MixtureMode mode,
                                 SeparationDiagnostics* diagnostics = nullptr) {
    mixture.validate();
    if (mixture.channel_count() < 2)
        throw dimension_error("separate: need at least 2 mixture channels");
    if (L < 1) throw config_error("separate: L must be >= 1");

    SparsifierConfig effective = sparse_cfg;
    if (effective.min_points == 0) effective.min_points = 100 * L;

    const Spectrogram spec = stft(mixture, stft_cfg);
    const SparseDirectionalSet selected = select_points(spec, effective);
    const WmdldModel model = fit(selected, L, em_cfg, mode);
    const AssignmentMap assignment = assign_points(spec, model);
    SeparatedSources sources = reconstruct(spec, assignment, model);

    if (diagnostics != nullptr) {
        diagnostics->assignment = assignment;
        diagnostics->selected_points = selected.count();
        diagnostics->effective_threshold = selected.effective_threshold;
    }
    return sources;
}

}  // namespace dirsep
