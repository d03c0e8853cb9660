#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tailors_stats::survey::{Condition, Survey};

pub const HEADER: &str = "participant_id,music_id,condition,survey,feature,score\n";

/// Full study design: `participants` x 20 music x 3 conditions x 25 items.
///
/// Scores are driven by a per-participant latent level so that regressions on
/// participant means have structure; `shift_c` adds a constant per participant
/// to condition C relative to condition A.
pub fn design_csv(participants: usize, seed: u64, shift_c: bool) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from(HEADER);
    for p in 1..=participants {
        let level: i32 = rng.random_range(-1..=1);
        let shift: i32 = rng.random_range(1..=2);
        for music in 1..=20 {
            for survey in Survey::ALL {
                for feature in survey.features() {
                    let base: i32 = (3 + level + rng.random_range(-2..=2)).clamp(1, 5);
                    for condition in Condition::ALL {
                        let score = match condition {
                            Condition::A => base,
                            Condition::B => rng.random_range(1..=7),
                            Condition::C if shift_c => base + shift,
                            Condition::C => (base + rng.random_range(-1..=2)).clamp(1, 7),
                        };
                        out.push_str(&format!(
                            "P{p:02},{music},{condition},{survey},{feature},{score}\n"
                        ));
                    }
                }
            }
        }
    }
    out
}
