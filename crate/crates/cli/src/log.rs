//! Verbosity-gated logging on stderr, controlled by `FDFNET_LOG`
//! (`quiet`, `info` (default), or `debug`).

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Quiet,
    Info,
    Debug,
}

pub fn level() -> Level {
    match std::env::var("FDFNET_LOG").as_deref() {
        Ok("quiet") => Level::Quiet,
        Ok("debug") => Level::Debug,
        _ => Level::Info,
    }
}

pub fn info(msg: impl AsRef<str>) {
    if level() >= Level::Info {
        eprintln!("{}", msg.as_ref());
    }
}

pub fn debug(msg: impl AsRef<str>) {
    if level() >= Level::Debug {
        eprintln!("{}", msg.as_ref());
    }
}
