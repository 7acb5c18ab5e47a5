// reference postcondition: t follows a under c, otherwise a and b together
method logical(a : bool, b : bool, c : bool) returns (t : bool)
  ensures t == if c then a else a && b
{
 t := false;
 if (b) {
    if (a) { t := true; } }  else { t := false; }
 if (c) { t := a; }
}
