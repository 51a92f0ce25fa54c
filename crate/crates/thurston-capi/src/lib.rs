//! Placeholder; filled in once the core library API is final.
