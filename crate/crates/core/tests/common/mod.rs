#![allow(dead_code)]

pub mod mccabe;
pub mod pyfix;
