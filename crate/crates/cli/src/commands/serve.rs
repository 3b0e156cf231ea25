//! `pmidc serve-toy`: serve a built-in model over the line protocol.
//!
//! Runs the deterministic table or n-gram models as a logit provider, either
//! on stdio (for `spawn:` model specs) or on a TCP listener. This is the
//! reference provider implementation integration tests decode against.

use std::io::{BufReader, Write};
use std::net::TcpListener;

use anyhow::{bail, Context, Result};
use clap::Args;
use pmidc_core::config::resolve_model;
use pmidc_core::protocol::{serve_model, DEFAULT_PROVIDER_TIMEOUT};

use crate::EXIT_OK;

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Built-in model spec to serve (table:<path> or ngram:<path>?...).
    #[arg(long)]
    pub model: String,
    /// Listen address (e.g. 127.0.0.1:0); serves stdio when omitted.
    #[arg(long)]
    pub listen: Option<String>,
    /// Model name reported in the handshake.
    #[arg(long, default_value = "toy")]
    pub name: String,
}

pub fn run(args: ServeArgs) -> Result<i32> {
    if !(args.model.starts_with("table:") || args.model.starts_with("ngram:")) {
        bail!("serve-toy serves built-in models only (table: or ngram: specs)");
    }
    let model = resolve_model(&args.model, None, DEFAULT_PROVIDER_TIMEOUT)?;

    match &args.listen {
        None => {
            let stdin = std::io::stdin();
            let stdout = std::io::stdout();
            serve_model(model.as_ref(), stdin.lock(), stdout.lock(), &args.name)?;
            Ok(EXIT_OK)
        }
        Some(addr) => {
            let listener = TcpListener::bind(addr)
                .with_context(|| format!("binding listener on {addr}"))?;
            // The bound address goes to stdout so callers can use port 0.
            println!("listening on {}", listener.local_addr()?);
            std::io::stdout().flush()?;
            for stream in listener.incoming() {
                let stream = stream?;
                let reader = BufReader::new(stream.try_clone()?);
                if let Err(err) = serve_model(model.as_ref(), reader, stream, &args.name) {
                    eprintln!("connection ended: {err}");
                }
            }
            Ok(EXIT_OK)
        }
    }
}
