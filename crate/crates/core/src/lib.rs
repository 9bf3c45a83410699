pub mod demo;
pub mod host;
pub mod registry;
pub mod security;
pub mod service;
pub mod soap;
pub mod transport;
pub mod wsdl;
mod xml;
