//! Twisted Reidemeister torsion of split simplicial complexes, determinant-line bookkeeping
//! for Mayer–Vietoris sequences, and a temporal-gauge ODE solver on a collar.

pub mod numlin;
pub mod simplicial;
pub mod localsys;
pub mod hilbcx;
pub mod detline;
pub mod gluelab;
pub mod gauge;
pub mod cli;
