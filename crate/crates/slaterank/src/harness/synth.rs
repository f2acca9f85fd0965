//! Synthetic dataset generation as a command: three LETOR files on disk.

use std::path::Path;

use super::train::{stream, LoadedData};
use crate::data::{generate_synthetic, slates_to_rows, write_letor, SyntheticSpec};
use crate::Real;

const STREAM_SYNTH: u64 = 101;

/// Generates the three splits in memory: `n_slates` training slates and a
/// quarter as many (at least one) for each of validation and test. All
/// three come from a single generator call so they share one hidden ground
/// truth (utility direction, grade thresholds) — held-out performance is
/// meaningless otherwise. Test and validation take the head of the
/// generated sequence; training takes the tail, which keeps constructed
/// witness slates (appended last) out of the held-out splits.
pub fn synthetic_splits<F: Real>(
    spec: &SyntheticSpec,
    seed: u64,
) -> Result<LoadedData<F>, crate::Error> {
    let holdout = (spec.n_slates / 4).max(1);
    let mut full = spec.clone();
    full.n_slates = spec.n_slates + 2 * holdout;
    let mut slates = generate_synthetic(&full, &mut stream(seed, STREAM_SYNTH))?;
    let train = slates.split_off(2 * holdout);
    let valid = slates.split_off(holdout);
    Ok(LoadedData {
        train,
        valid,
        test: slates,
    })
}

/// Writes `train.txt`, `vali.txt` and `test.txt` under `out_dir`. The
/// files are byte-identical across runs with the same spec and seed, and
/// re-parse to the generating slates exactly.
pub fn synth_command(spec: &SyntheticSpec, seed: u64, out_dir: &Path) -> Result<(), crate::Error> {
    std::fs::create_dir_all(out_dir)?;
    let data = synthetic_splits::<f64>(spec, seed)?;
    for (name, slates) in [
        ("train.txt", &data.train),
        ("vali.txt", &data.valid),
        ("test.txt", &data.test),
    ] {
        std::fs::write(out_dir.join(name), write_letor(&slates_to_rows(slates)))?;
    }
    Ok(())
}
