//! Plain-text checkpoint of the five Q networks.
//!
//! ```text
//! lanechange-qnet 1
//! bound_mode symmetric
//! seed 0
//! steps 40000
//! config seed = 0
//! config ...
//! net A 8-100-1 neg_softplus 1001
//! <1001 parameters, one per line>
//! net C 9-100-1 linear 1101
//! ...
//! end
//! ```
//!
//! Parameters are listed layer by layer, weights (row-major) before biases,
//! in shortest round-trip form so a reload is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use super::config::Config;
use crate::nn::{Mlp, OutputHead};
use crate::qlearn::quadratic::{architecture, NET_NAMES};
use crate::qlearn::{BoundMode, QuadraticQ};
use crate::{Error, Result};

pub const MAGIC: &str = "lanechange-qnet 1";

fn sizes_text(sizes: &[usize]) -> String {
    sizes.iter().map(usize::to_string).collect::<Vec<_>>().join("-")
}

/// Provenance stored in the checkpoint header.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub seed: u64,
    /// Gradient steps taken when the checkpoint was written.
    pub steps: u64,
    pub config: Config,
}

pub fn write_checkpoint(q: &QuadraticQ, meta: &CheckpointMeta) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "bound_mode {}", q.bound_mode.name());
    let _ = writeln!(out, "seed {}", meta.seed);
    let _ = writeln!(out, "steps {}", meta.steps);
    for line in meta.config.to_text().lines() {
        let _ = writeln!(out, "config {line}");
    }
    for (name, net) in NET_NAMES.iter().zip(q.nets()) {
        let _ = writeln!(
            out,
            "net {name} {} {} {}",
            sizes_text(&net.layer_sizes()),
            net.head().name(),
            net.param_count()
        );
        for p in net.flat_params() {
            let _ = writeln!(out, "{p:e}");
        }
    }
    out.push_str("end\n");
    out
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::Checkpoint(format!("line {line}: {}", msg.into()))
}

pub fn read_checkpoint(text: &str) -> Result<QuadraticQ> {
    parse_checkpoint(text).map(|(q, _)| q)
}

fn number<T: std::str::FromStr>(n: usize, line: &str, key: &str) -> Result<T> {
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad(n, format!("expected `{key} <integer>`, found `{line}`")))
}

/// The model together with its header metadata.
pub fn parse_checkpoint(text: &str) -> Result<(QuadraticQ, CheckpointMeta)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::Checkpoint(format!("unexpected end of file while reading {what}")))
    };

    let (n, magic) = next("header")?;
    if magic != MAGIC {
        return Err(bad(n, format!("expected header `{MAGIC}`, found `{magic}`")));
    }
    let (n, mode_line) = next("bound mode")?;
    let bound_mode = mode_line
        .strip_prefix("bound_mode ")
        .and_then(BoundMode::from_name)
        .ok_or_else(|| bad(n, format!("bad bound mode line `{mode_line}`")))?;
    let (n, line) = next("seed")?;
    let seed = number(n, line, "seed")?;
    let (n, line) = next("steps")?;
    let steps = number(n, line, "steps")?;

    let mut config_text = String::new();
    let mut first = next("net A")?;
    let config_line = first.0;
    while let Some(entry) = first.1.strip_prefix("config ") {
        config_text.push_str(entry);
        config_text.push('\n');
        first = next("net A")?;
    }
    let config = Config::parse(&config_text).map_err(|e| bad(config_line, format!("config echo: {e}")))?;

    let mut nets: Vec<Mlp> = Vec::with_capacity(5);
    for (k, (name, (sizes, head))) in NET_NAMES.iter().zip(architecture()).enumerate() {
        let (n, header) = if k == 0 { first } else { next(&format!("net {name}"))? };
        let mut template = Mlp::zeros(&sizes, head)?;
        let expected = format!(
            "net {name} {} {} {}",
            sizes_text(&sizes),
            head.name(),
            template.param_count()
        );
        if header != expected {
            let found_head = header.split_whitespace().nth(3).and_then(OutputHead::from_name);
            let detail = match found_head {
                Some(h) if h != head => format!("output head {} where {} is required", h.name(), head.name()),
                _ => "architecture mismatch".into(),
            };
            return Err(bad(n, format!("{detail}: expected `{expected}`, found `{header}`")));
        }
        let count = template.param_count();
        let mut params = Vec::with_capacity(count);
        for k in 0..count {
            let (n, raw) = lines_next_param(&mut next, name, k, count)?;
            let v: f64 = raw.parse().map_err(|_| bad(n, format!("`{raw}` is not a number")))?;
            if !v.is_finite() {
                return Err(bad(n, format!("non-finite parameter in net {name}")));
            }
            params.push(v);
        }
        template.set_flat_params(&params)?;
        nets.push(template);
    }
    let (n, end) = next("end marker")?;
    if end != "end" {
        return Err(bad(n, format!("expected `end`, found `{end}`")));
    }
    let nets: [Mlp; 5] = nets.try_into().expect("five networks read");
    let model = QuadraticQ::from_nets(nets, bound_mode)?;
    Ok((model, CheckpointMeta { seed, steps, config }))
}

fn lines_next_param<'a, F>(next: &mut F, name: &str, k: usize, count: usize) -> Result<(usize, &'a str)>
where
    F: FnMut(&str) -> Result<(usize, &'a str)>,
{
    let (n, raw) = next(name).map_err(|_| {
        Error::Checkpoint(format!(
            "truncated: net {name} expects {count} parameters, found {k}"
        ))
    })?;
    if raw.starts_with("net ") || raw == "end" {
        return Err(bad(
            n,
            format!("truncated: net {name} expects {count} parameters, found {k}"),
        ));
    }
    Ok((n, raw))
}

pub fn save_checkpoint(q: &QuadraticQ, meta: &CheckpointMeta, path: &Path) -> Result<()> {
    std::fs::write(path, write_checkpoint(q, meta))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<QuadraticQ> {
    read_checkpoint(&std::fs::read_to_string(path)?)
}
