use std::path::Path;

use uorrl_core::space::{compute_masses, set_division};
use uorrl_core::{Block, ParamDistribution, ParameterSpace};

use crate::artifacts::write_csv;
use crate::error::CliResult;

/// Divides `space` into blocks of diameter at most `delta`, prints one line
/// per block and writes `blocks.csv` under `out` when given. With a
/// distribution, block masses are filled in as well.
pub fn cmd_divide(
    space: &ParameterSpace,
    delta: f64,
    dist: Option<&ParamDistribution>,
    out: Option<&Path>,
) -> CliResult<Vec<Block>> {
    let mut blocks = set_division(space, delta)?;
    if let Some(d) = dist {
        blocks = compute_masses(&blocks, d)?;
    }
    let dims = space.dims();
    let mut head = vec!["id".to_string()];
    for prefix in ["lower", "upper", "representative"] {
        head.extend((0..dims).map(|i| format!("{prefix}_{i}")));
    }
    head.push("diameter".into());
    if dist.is_some() {
        head.push("mass".into());
    }
    let rows: Vec<Vec<String>> = blocks
        .iter()
        .map(|b| {
            let mut row = vec![b.id.to_string()];
            for v in b.lower.iter().chain(&b.upper).chain(&b.representative) {
                row.push(v.to_string());
            }
            row.push(b.diameter().to_string());
            if dist.is_some() {
                row.push(b.mass.to_string());
            }
            row
        })
        .collect();
    println!("{}", head.join("\t"));
    for row in &rows {
        println!("{}", row.join("\t"));
    }
    if let Some(dir) = out {
        write_csv(&dir.join("blocks.csv"), &head, rows)?;
    }
    Ok(blocks)
}
