//! Minimal stderr logger controlled by the `MPLITE_LOG` environment
//! variable (`error`, `info` or `debug`; default `info`).

use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Error = 0,
    Info = 1,
    Debug = 2,
}

static LEVEL: OnceLock<Level> = OnceLock::new();

fn level() -> Level {
    *LEVEL.get_or_init(|| match std::env::var("MPLITE_LOG").as_deref() {
        Ok("error") => Level::Error,
        Ok("debug") => Level::Debug,
        _ => Level::Info,
    })
}

/// Force the level, ignoring the environment. First call wins.
pub fn set_level(l: Level) {
    let _ = LEVEL.set(l);
}

pub fn error(msg: impl AsRef<str>) {
    eprintln!("[mplite error] {}", msg.as_ref());
}

pub fn info(msg: impl AsRef<str>) {
    if level() >= Level::Info {
        eprintln!("[mplite] {}", msg.as_ref());
    }
}

pub fn warn(msg: impl AsRef<str>) {
    if level() >= Level::Info {
        eprintln!("[mplite warning] {}", msg.as_ref());
    }
}

pub fn debug(msg: impl AsRef<str>) {
    if level() >= Level::Debug {
        eprintln!("[mplite debug] {}", msg.as_ref());
    }
}
