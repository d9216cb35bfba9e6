//! Frame fixtures: a line `M N`, then `M` rows of `N` entries in
//! `{-1, 0, 1}`, then one row of `M` success probabilities. Blank lines and
//! `#` comments are ignored.

use idnc_core::FrameState;

use crate::CliError;

pub fn parse_fixture(text: &str) -> Result<FrameState, CliError> {
    let lines: Vec<(usize, Vec<&str>)> = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.split('#').next().unwrap_or("").split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, t)| !t.is_empty())
        .collect();
    let err = |line: usize, msg: String| CliError::Config(format!("fixture line {line}: {msg}"));
    let Some((first, dims)) = lines.first() else {
        return Err(CliError::Config("empty fixture".into()));
    };
    let [m, n] = dims[..] else {
        return Err(err(*first, format!("expected `M N`, got {} fields", dims.len())));
    };
    let parse_dim =
        |s: &str| s.parse::<usize>().ok().filter(|&v| v > 0).ok_or_else(|| err(*first, format!("bad dimension {s:?}")));
    let (m, n) = (parse_dim(m)?, parse_dim(n)?);
    if lines.len() != m + 2 {
        let last = lines.last().map_or(*first, |l| l.0);
        return Err(err(
            last,
            format!("expected {m} matrix rows and one probability row, found {} lines", lines.len() - 1),
        ));
    }
    let mut rows = Vec::with_capacity(m);
    for (line, tokens) in &lines[1..=m] {
        if tokens.len() != n {
            return Err(err(*line, format!("expected {n} entries, got {}", tokens.len())));
        }
        let row = tokens
            .iter()
            .map(|t| match *t {
                "-1" => Ok(-1i8),
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(err(*line, format!("entry {other:?} is not -1, 0 or 1"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let (line, tokens) = &lines[m + 1];
    if tokens.len() != m {
        return Err(err(*line, format!("expected {m} success probabilities, got {}", tokens.len())));
    }
    let q = tokens
        .iter()
        .map(|t| t.parse::<f64>().map_err(|_| err(*line, format!("bad probability {t:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    FrameState::from_rows(&rows, &q).map_err(CliError::config)
}
