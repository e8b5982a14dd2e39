// Invertible short-time Fourier analysis. Analysis windows each frame and
// keeps the non-negative bins of a power-of-two FFT; synthesis applies the
// window again, overlap-adds, and divides by the accumulated squared window,
// which makes the round trip exact over the original sample span for every
// config that validate() accepts.
#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "dirsep/audio.hpp"
#include "dirsep/errors.hpp"
#include "dirsep/fft.hpp"

namespace dirsep {

enum class Window { hann, rect };

struct StftConfig {
    std::size_t frame_length = 0;
    std::size_t hop = 0;
    Window window = Window::hann;
    std::size_t fft_size = 0;

    // Frame length from milliseconds at the given rate, rounded to an even
    // sample count; 50% overlap Hann, FFT size the next power of two.
    static StftConfig from_frame_ms(double frame_ms, double sample_rate) {
        StftConfig cfg;
        auto frame = static_cast<std::size_t>(std::lround(frame_ms * sample_rate / 1000.0));
        if (frame < 2) frame = 2;
        if (frame % 2 != 0) ++frame;
        cfg.frame_length = frame;
        cfg.hop = frame / 2;
        cfg.window = Window::hann;
        cfg.fft_size = detail::next_power_of_two(frame);
        return cfg;
    }

    std::size_t bins() const { return fft_size / 2 + 1; }

    // Rejects configs whose analysis/synthesis pair cannot reconstruct: the
    // Hann taper is zero at the frame edge, so overlap of at least 50% is
    // required for full coverage of every sample.
    void validate() const {
        if (frame_length == 0 || hop == 0) throw config_error("StftConfig: frame_length and hop must be > 0");
        if (hop > frame_length) throw config_error("StftConfig: hop must not exceed frame_length");
        if (fft_size < frame_length) throw config_error("StftConfig: fft_size must cover frame_length");
        if (!detail::is_power_of_two(fft_size)) throw config_error("StftConfig: fft_size must be a power of two");
        if (window == Window::hann && 2 * hop > frame_length)
            throw config_error("StftConfig: Hann window requires hop <= frame_length/2 for exact inversion");
    }
};

struct Spectrogram {
    std::size_t channels = 0;
    std::size_t frames = 0;
    std::size_t bins = 0;
    std::vector<std::complex<double>> values;  // indexed (channel, t, f)
    StftConfig config;
    double sample_rate = 0.0;
    std::size_t original_length = 0;

    std::complex<double>& at(std::size_t ch, std::size_t t, std::size_t f) {
        return values[(ch * frames + t) * bins + f];
    }
    const std::complex<double>& at(std::size_t ch, std::size_t t, std::size_t f) const {
        return values[(ch * frames + t) * bins + f];
    }

    void validate() const {
        if (values.size() != channels * frames * bins)
            throw dimension_error("Spectrogram: value count does not match dimensions");
        config.validate();
    }
};

namespace detail {

inline std::vector<double> make_window(Window w, std::size_t len) {
    std::vector<double> win(len, 1.0);
    if (w == Window::hann) {
        for (std::size_t j = 0; j < len; ++j)
            win[j] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(len)));
    }
    return win;
}

// Samples before the signal start are zero; this left pad gives the first
// real sample full window-phase coverage.
inline std::size_t stft_pad_left(const StftConfig& cfg) { return cfg.frame_length - cfg.hop; }

inline std::size_t stft_frame_count(const StftConfig& cfg, std::size_t n_samples) {
    if (n_samples == 0) return 0;
    return (stft_pad_left(cfg) + n_samples - 1) / cfg.hop + 1;
}

}  // namespace detail

inline Spectrogram stft(const AudioBuffer& buf, const StftConfig& cfg) {
    buf.validate();
    cfg.validate();

    const std::size_t n = buf.sample_count();
    const std::size_t frames = detail::stft_frame_count(cfg, n);
    const std::size_t pad_left = detail::stft_pad_left(cfg);

    Spectrogram spec;
    spec.channels = buf.channel_count();
    spec.frames = frames;
    spec.bins = cfg.bins();
    spec.config = cfg;
    spec.sample_rate = buf.sample_rate;
    spec.original_length = n;
    spec.values.assign(spec.channels * frames * spec.bins, {0.0, 0.0});

    const std::vector<double> win = detail::make_window(cfg.window, cfg.frame_length);
    std::vector<std::complex<double>> work(cfg.fft_size);

    for (std::size_t ch = 0; ch < spec.channels; ++ch) {
        const std::vector<double>& x = buf.channels[ch];
        for (std::size_t t = 0; t < frames; ++t) {
            std::fill(work.begin(), work.end(), std::complex<double>{0.0, 0.0});
            const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t * cfg.hop) - static_cast<std::ptrdiff_t>(pad_left);
            for (std::size_t j = 0; j < cfg.frame_length; ++j) {
                const std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(j);
                if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(n))
                    work[j] = {x[static_cast<std::size_t>(idx)] * win[j], 0.0};
            }
            detail::fft_radix2(work, false);
            for (std::size_t f = 0; f < spec.bins; ++f) spec.at(ch, t, f) = work[f];
        }
    }
    return spec;
}

inline AudioBuffer istft(const Spectrogram& spec) {
    spec.validate();
    const StftConfig& cfg = spec.config;
    const std::size_t pad_left = detail::stft_pad_left(cfg);
    const std::size_t n = spec.original_length;
    const std::size_t padded = spec.frames == 0 ? 0 : (spec.frames - 1) * cfg.hop + cfg.frame_length;

    const std::vector<double> win = detail::make_window(cfg.window, cfg.frame_length);

    std::vector<double> den(padded, 0.0);
    for (std::size_t t = 0; t < spec.frames; ++t)
        for (std::size_t j = 0; j < cfg.frame_length; ++j) den[t * cfg.hop + j] += win[j] * win[j];

    AudioBuffer out;
    out.sample_rate = spec.sample_rate;
    out.channels.assign(spec.channels, std::vector<double>(n, 0.0));

    std::vector<std::complex<double>> work(cfg.fft_size);
    std::vector<double> acc;
    for (std::size_t ch = 0; ch < spec.channels; ++ch) {
        acc.assign(padded, 0.0);
        for (std::size_t t = 0; t < spec.frames; ++t) {
            for (std::size_t f = 0; f < spec.bins; ++f) work[f] = spec.at(ch, t, f);
            for (std::size_t f = spec.bins; f < cfg.fft_size; ++f)
                work[f] = std::conj(spec.at(ch, t, cfg.fft_size - f));
            detail::fft_radix2(work, true);
            const double scale = 1.0 / static_cast<double>(cfg.fft_size);
            for (std::size_t j = 0; j < cfg.frame_length; ++j)
                acc[t * cfg.hop + j] += work[j].real() * scale * win[j];
        }
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t p = i + pad_left;
            out.channels[ch][i] = den[p] > 1e-12 ? acc[p] / den[p] : 0.0;
        }
    }
    return out;
}

}  // namespace dirsep
