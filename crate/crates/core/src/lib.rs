//! Meta-federated reinforcement learning for distributed uplink resource
//! allocation.
//!
//! A single cell with `I` UEs and `N` OFDMA subchannels. Each UE runs its
//! own actor-critic network which picks a subchannel (categorical head) and
//! a transmit power (Gaussian head) from local channel gains, aiming to
//! maximize the cell's summed energy efficiency. Networks are initialized
//! by pooled multi-task training at the base station ([`meta`]), fine-tuned
//! locally with PPO ([`ppo`]) and periodically merged by federated
//! averaging ([`fed`]).
//!
//! Module map:
//!
//! - [`channel`]: pathloss, shadowing, Rayleigh fading, noise, SNR, energy efficiency.
//! - [`env`]: the multi-agent MDP with the shared team reward.
//! - [`net`]: shared-trunk actor-critic network, exact gradients, Adam.
//! - [`ppo`]: GAE, clipped surrogate, critic loss, minibatch updates.
//! - [`meta`]: pooled meta-training of one initialization across task sizes.
//! - [`fed`]: local adaptation with size- or success-weighted model averaging.
//! - [`baselines`]: benchmark variants and exact assignment oracles.
//! - [`experiment`]: configuration, CSV/plot output and the CLI verbs.

pub mod baselines;
pub mod channel;
pub mod config;
pub mod env;
mod error;
pub mod experiment;
pub mod fed;
pub mod meta;
pub mod net;
mod plot;
pub mod ppo;
pub mod rng;
pub mod rollout;

pub use error::{Error, Result};
