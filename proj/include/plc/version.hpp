#pragma once

namespace plc {

inline constexpr const char* kVersion = "1.0.0";

// Wire handshake: 4-byte magic, protocol version, role.
inline constexpr unsigned char kHandshakeMagic[4] = {'P', 'L', 'C', 'B'};
inline constexpr unsigned char kProtocolVersion = 0x01;
inline constexpr unsigned char kRoleSender = 0x01;
inline constexpr int kHandshakeSize = 6;

// Samples at the head of a live measurement run that are still inside the
// transport ramp-up; they are marked, not dropped.
inline constexpr int kWarmupSamples = 3;

}  // namespace plc
