// Multichannel audio buffers and WAV file I/O (PCM 16-bit and IEEE float 32-bit).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "dirsep/errors.hpp"

namespace dirsep {

// Time-domain signal: one sample vector per channel, all the same length.
struct AudioBuffer {
    std::vector<std::vector<double>> channels;
    double sample_rate = 0.0;

    std::size_t channel_count() const { return channels.size(); }

    std::size_t sample_count() const { return channels.empty() ? 0 : channels.front().size(); }

    void validate() const {
        if (channels.empty()) throw dimension_error("AudioBuffer: no channels");
        if (sample_rate <= 0.0) throw config_error("AudioBuffer: sample_rate must be > 0");
        const std::size_t n = channels.front().size();
        for (const auto& ch : channels)
            if (ch.size() != n) throw dimension_error("AudioBuffer: channel lengths differ");
    }
};

enum class SampleFormat { pcm16, float32 };

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct ByteReader {
    const unsigned char* data;
    std::size_t size;
    std::size_t pos = 0;

    bool can_read(std::size_t n) const { return pos + n <= size; }

    std::uint16_t u16() {
        if (!can_read(2)) throw format_error("WAV: truncated file");
        std::uint16_t v = static_cast<std::uint16_t>(data[pos] | (data[pos + 1] << 8));
        pos += 2;
        return v;
    }

    std::uint32_t u32() {
        if (!can_read(4)) throw format_error("WAV: truncated file");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }

    std::string tag() {
        if (!can_read(4)) throw format_error("WAV: truncated file");
        std::string s(reinterpret_cast<const char*>(data + pos), 4);
        pos += 4;
        return s;
    }

    void skip(std::size_t n) {
        if (!can_read(n)) throw format_error("WAV: truncated chunk");
        pos += n;
    }
};

}  // namespace detail

// Reads a little-endian RIFF/WAVE file. Accepts PCM 16-bit and IEEE float
// 32-bit encodings; everything else raises unsupported_error. PCM samples are
// scaled by 1/32768 so full-scale positive is 32767/32768.
inline AudioBuffer read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open for reading: " + path);
    std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    detail::ByteReader r{raw.data(), raw.size()};

    if (r.tag() != "RIFF") throw format_error("WAV: missing RIFF header: " + path);
    r.u32();  // RIFF payload size; data chunk size is authoritative
    if (r.tag() != "WAVE") throw format_error("WAV: missing WAVE tag: " + path);

    std::uint16_t audio_format = 0, num_channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    const unsigned char* payload = nullptr;
    std::uint32_t payload_size = 0;

    while (r.can_read(8)) {
        const std::string id = r.tag();
        const std::uint32_t sz = r.u32();
        if (id == "fmt ") {
            if (sz < 16) throw format_error("WAV: fmt chunk too small");
            audio_format = r.u16();
            num_channels = r.u16();
            rate = r.u32();
            r.u32();  // byte rate
            r.u16();  // block align
            bits = r.u16();
            r.skip(sz - 16);
            have_fmt = true;
        } else if (id == "data") {
            if (!r.can_read(sz)) throw format_error("WAV: truncated data chunk");
            payload = raw.data() + r.pos;
            payload_size = sz;
            r.skip(sz);
        } else {
            r.skip(sz);
        }
        if (sz & 1) {  // RIFF chunks are word-aligned
            if (r.can_read(1)) r.skip(1);
        }
    }
    if (!have_fmt) throw format_error("WAV: missing fmt chunk: " + path);
    if (payload == nullptr) throw format_error("WAV: missing data chunk: " + path);
    if (num_channels == 0) throw format_error("WAV: zero channels");
    if (rate == 0) throw format_error("WAV: zero sample rate");

    const bool pcm16 = audio_format == 1 && bits == 16;
    const bool f32 = audio_format == 3 && bits == 32;
    if (!pcm16 && !f32)
        throw unsupported_error("WAV: only PCM16 and float32 are supported (format "
                                + std::to_string(audio_format) + ", " + std::to_string(bits) + " bits)");

    const std::size_t bytes_per_sample = pcm16 ? 2 : 4;
    const std::size_t frame_bytes = bytes_per_sample * num_channels;
    const std::size_t frames = payload_size / frame_bytes;

    AudioBuffer buf;
    buf.sample_rate = static_cast<double>(rate);
    buf.channels.assign(num_channels, std::vector<double>(frames));
    for (std::size_t n = 0; n < frames; ++n) {
        const unsigned char* p = payload + n * frame_bytes;
        for (std::size_t k = 0; k < num_channels; ++k) {
            if (pcm16) {
                const std::uint16_t u = static_cast<std::uint16_t>(p[2 * k] | (p[2 * k + 1] << 8));
                buf.channels[k][n] = static_cast<std::int16_t>(u) / 32768.0;
            } else {
                std::uint32_t u = 0;
                for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(p[4 * k + i]) << (8 * i);
                float v;
                std::memcpy(&v, &u, 4);
                buf.channels[k][n] = static_cast<double>(v);
            }
        }
    }
    return buf;
}

// Writes a little-endian RIFF/WAVE file with interleaved channels. PCM16
// rounds to the nearest step of 1/32768 and clamps at full scale.
inline void write_wav(const AudioBuffer& buf, const std::string& path,
                      SampleFormat fmt = SampleFormat::float32) {
    buf.validate();
    const std::size_t channels = buf.channel_count();
    const std::size_t frames = buf.sample_count();
    const std::uint16_t bits = fmt == SampleFormat::pcm16 ? 16 : 32;
    const std::uint16_t block_align = static_cast<std::uint16_t>(channels * bits / 8);
    const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(buf.sample_rate));
    const std::uint32_t data_size = static_cast<std::uint32_t>(frames * block_align);

    std::string out;
    out.reserve(44 + data_size);
    out += "RIFF";
    detail::put_u32(out, 36 + data_size);
    out += "WAVE";
    out += "fmt ";
    detail::put_u32(out, 16);
    detail::put_u16(out, fmt == SampleFormat::pcm16 ? 1 : 3);
    detail::put_u16(out, static_cast<std::uint16_t>(channels));
    detail::put_u32(out, rate);
    detail::put_u32(out, rate * block_align);
    detail::put_u16(out, block_align);
    detail::put_u16(out, bits);
    out += "data";
    detail::put_u32(out, data_size);

    for (std::size_t n = 0; n < frames; ++n) {
        for (std::size_t k = 0; k < channels; ++k) {
            const double x = buf.channels[k][n];
            if (fmt == SampleFormat::pcm16) {
                long v = std::lround(x * 32768.0);
                v = std::clamp(v, -32768l, 32767l);
                detail::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
            } else {
                const float f = static_cast<float>(x);
                std::uint32_t u;
                std::memcpy(&u, &f, 4);
                detail::put_u32(out, u);
            }
        }
    }

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw io_error("cannot open for writing: " + path);
    os.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!os) throw io_error("short write: " + path);
}

}  // namespace dirsep
