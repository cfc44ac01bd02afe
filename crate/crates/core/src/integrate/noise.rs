//! Counter-based Gaussian noise.
//!
//! Every scalar Wiener mode of every particle owns one ChaCha8 stream selected
//! by a packed [`StreamId`]. Step `k` of a stream always consumes words
//! `4k..4k + 4`, so the increment at `(seed, stream, step)` is fixed no matter
//! how streams are scheduled or in which order steps are visited.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PARTICLE_BITS: u32 = 24;
const MODE_BITS: u32 = 10;
const TAG_BITS: u32 = 28;

/// Largest particle count addressable by a stream id.
pub const MAX_PARTICLES: usize = 1 << PARTICLE_BITS;
/// Largest noise-mode count addressable by a stream id.
pub const MAX_MODES: usize = 1 << MODE_BITS;
/// Largest tag addressable by a stream id.
pub const MAX_TAG: u64 = 1 << TAG_BITS;

/// Which Wiener family a stream belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamKind {
    Slow = 0,
    Fast = 1,
    Frozen = 2,
    Init = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub kind: StreamKind,
    pub particle: usize,
    pub mode: usize,
    pub tag: u64,
}

impl StreamId {
    pub fn new(kind: StreamKind, particle: usize, mode: usize, tag: u64) -> Self {
        assert!(
            particle < MAX_PARTICLES,
            "particle index {particle} exceeds stream id range"
        );
        assert!(mode < MAX_MODES, "mode index {mode} exceeds stream id range");
        assert!(tag < MAX_TAG, "tag {tag} exceeds stream id range");
        Self {
            kind,
            particle,
            mode,
            tag,
        }
    }

    pub fn slow(particle: usize, mode: usize) -> Self {
        Self::new(StreamKind::Slow, particle, mode, 0)
    }

    pub fn fast(particle: usize, mode: usize) -> Self {
        Self::new(StreamKind::Fast, particle, mode, 0)
    }

    pub fn packed(&self) -> u64 {
        ((self.kind as u64) << (PARTICLE_BITS + MODE_BITS + TAG_BITS))
            | ((self.particle as u64) << (MODE_BITS + TAG_BITS))
            | ((self.mode as u64) << TAG_BITS)
            | self.tag
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Root of all randomness of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoisePlan {
    pub seed: u64,
}

impl NoisePlan {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Independent plan for replication `r`.
    pub fn replication(&self, r: u64) -> Self {
        Self {
            seed: mix64(self.seed ^ mix64(r.wrapping_add(0x5EED))),
        }
    }

    pub fn stream(&self, id: StreamId) -> NoiseStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id.packed());
        NoiseStream { rng, next_step: 0 }
    }

    /// Standard normal increment of `id` at `step`, by random access.
    pub fn normal(&self, id: StreamId, step: u64) -> f64 {
        self.stream(id).normal_at(step)
    }
}

/// One positioned stream. Sequential access is cheap; jumps reposition.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    next_step: u64,
}

const WORDS_PER_STEP: u128 = 4;

impl NoiseStream {
    /// Standard normal for `step` (Box-Muller on two 64-bit words).
    pub fn normal_at(&mut self, step: u64) -> f64 {
        if step != self.next_step {
            self.rng.set_word_pos(step as u128 * WORDS_PER_STEP);
        }
        self.next_step = step + 1;
        let a = self.rng.next_u64();
        let b = self.rng.next_u64();
        let u1 = ((a >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn next_normal(&mut self) -> f64 {
        self.normal_at(self.next_step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increments_are_counter_based() {
        let plan = NoisePlan::new(7);
        let id = StreamId::slow(3, 1);
        let mut s = plan.stream(id);
        let seq: Vec<f64> = (0..10).map(|_| s.next_normal()).collect();
        for (k, &z) in seq.iter().enumerate().rev() {
            assert_eq!(plan.normal(id, k as u64), z);
        }
        let mut t = plan.stream(id);
        assert_eq!(t.normal_at(5), seq[5]);
        assert_eq!(t.normal_at(2), seq[2]);
        assert_eq!(t.next_normal(), seq[3]);
    }

    #[test]
    fn streams_differ() {
        let plan = NoisePlan::new(1);
        let a = plan.normal(StreamId::slow(0, 0), 0);
        let b = plan.normal(StreamId::fast(0, 0), 0);
        let c = plan.normal(StreamId::slow(1, 0), 0);
        let d = plan.replication(1).normal(StreamId::slow(0, 0), 0);
        assert!(a != b && a != c && a != d && b != c);
    }

    #[test]
    fn packing_is_injective_on_fields() {
        let ids = [
            StreamId::new(StreamKind::Frozen, 1, 0, 0),
            StreamId::new(StreamKind::Frozen, 0, 1, 0),
            StreamId::new(StreamKind::Frozen, 0, 0, 1),
            StreamId::new(StreamKind::Init, 0, 0, 0),
        ];
        for i in 0..ids.len() {
            for j in 0..i {
                assert_ne!(ids[i].packed(), ids[j].packed());
            }
        }
    }

    #[test]
    fn moments_of_normals() {
        let mut s = NoisePlan::new(11).stream(StreamId::fast(0, 0));
        let n = 200_000;
        let (mut m1, mut m2) = (0.0, 0.0);
        for _ in 0..n {
            let z = s.next_normal();
            m1 += z;
            m2 += z * z;
        }
        m1 /= n as f64;
        m2 /= n as f64;
        assert!(m1.abs() < 0.01, "{m1}");
        assert!((m2 - 1.0).abs() < 0.02, "{m2}");
    }
}
