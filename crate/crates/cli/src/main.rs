mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use args::Cli;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse_from(&argv);
    match commands::run(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = json!({ "error": error_json(&e) });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}

fn error_json(e: &rankhc::Error) -> serde_json::Value {
    use rankhc::Error as E;
    let mut v = json!({ "kind": e.kind(), "message": e.to_string() });
    let extra = match e {
        E::TableMissing { n, t } => json!({ "n": n, "t": t }),
        E::TableShape {
            table_n,
            table_t,
            n,
            t,
        } => json!({ "table_n": table_n, "table_t": table_t, "n": n, "t": t }),
        E::Io { path, .. } => json!({ "path": path }),
        E::Parse { row, col, .. } | E::Missing { row, col } | E::NonFinite { row, col } => {
            json!({ "row": row, "col": col })
        }
        E::Ragged { row, expected, found } => json!({ "row": row, "expected": expected, "found": found }),
        E::LengthMismatch { expected, found } => json!({ "expected": expected, "found": found }),
        E::BudgetExceeded { requested, budget } => {
            json!({ "requested": requested.to_string(), "budget": budget.to_string() })
        }
        _ => json!({}),
    };
    if let (Some(obj), serde_json::Value::Object(more)) = (v.as_object_mut(), extra) {
        obj.extend(more);
    }
    v
}
