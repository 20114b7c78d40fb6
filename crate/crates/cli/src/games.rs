//! `kind:detail` game specifications.

use anyhow::{bail, Context, Result};
use capi::game::{ConstantGame, MoebiusGame, TableGame, UnanimityGame};
use capi::{Coalition, Game, TreeEnsemble};

/// Loads a game from `constant:c`, `unanimity:bits`, `moebius:path`,
/// `tree:path` or `table:path`. Only `constant` needs `n`.
pub fn load_game(spec: &str, n: Option<usize>) -> Result<Box<dyn Game>> {
    let Some((kind, detail)) = spec.split_once(':') else {
        return Err(capi::Error::Parse(format!("game spec {spec:?} is not kind:detail")).into());
    };
    let game: Box<dyn Game> = match kind {
        "constant" => {
            let value: f64 = detail
                .parse()
                .map_err(|_| capi::Error::Parse(format!("bad constant {detail:?}")))?;
            let Some(n) = n else {
                bail!(capi::Error::Parse("constant games need --n".into()));
            };
            Box::new(ConstantGame { n, value })
        }
        "unanimity" => Box::new(UnanimityGame::new(Coalition::parse_bits(detail)?)),
        "moebius" => Box::new(MoebiusGame::from_csv_path(detail).with_context(|| format!("reading {detail}"))?),
        "table" => Box::new(TableGame::from_csv_path(detail).with_context(|| format!("reading {detail}"))?),
        "tree" => {
            let (ensemble, report) = TreeEnsemble::load(detail).with_context(|| format!("reading {detail}"))?;
            if report.dropped_leaves > 0 {
                log::warn!("{} unreachable leaves dropped from {detail}", report.dropped_leaves);
            }
            Box::new(ensemble)
        }
        other => return Err(capi::Error::Parse(format!("unknown game kind {other:?}")).into()),
    };
    if let Some(n) = n {
        if game.n_players() != n {
            bail!(capi::Error::WidthMismatch {
                expected: n,
                got: game.n_players(),
            });
        }
    }
    Ok(game)
}
