//! Command-line tools and the annotation HTTP service.

pub mod annotate;
pub mod commands;
pub mod oracle_http;
pub mod service;
