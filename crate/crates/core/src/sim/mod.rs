//! Synthetic 802.11b transmitters, hardware impairments and channels.

pub mod channel;
pub mod dsss;
pub mod frame;
pub mod humps;
pub mod impairments;
pub mod population;

pub use channel::{apply_channel, ChannelProfile};
pub use dsss::{generate_dsss_baseband, random_payload, DsssConfig, BARKER_11};
pub use frame::{ChannelKind, DomainLabel, IQFrame, DEFAULT_SAMPLE_RATE_HZ, FRAME_LEN};
pub use humps::{count_envelope_humps, HumpConfig};
pub use impairments::{apply_impairments, DeviceProfile, WARMUP_DRIFT_HZ_PER_S};
pub use population::{draw_population, draw_rogues, PopulationConfig};
