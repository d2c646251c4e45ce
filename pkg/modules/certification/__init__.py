# Certificate checkers, bound arithmetic and the GSRM objective.
