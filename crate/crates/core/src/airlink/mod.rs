//! System configuration, constellations, channel draws, OFDM transmission
//! and 1-bit quantization.

mod channel;
mod config;
mod constellation;
mod link;

pub use channel::{
    draw_channel, tap_to_subcarrier_kernel, tap_variance, time_to_freq_channel, ChannelRealization,
    FreqChannel,
};
pub use config::{noise_from_snr, ConstellationKind, SystemConfig};
pub use constellation::Constellation;
pub use link::{
    demodulate, extended_dot, modulate, one_bit_quantize, quantize_sample, transmit,
    transmit_block, ReceivedBits, SymbolFrame, Transmission,
};

pub(crate) use link::extended_dot_into;
