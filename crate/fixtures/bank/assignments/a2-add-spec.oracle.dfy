// reference: both arguments are bounded above by the result for naturals
method Add(a: int, b: int) returns (r: int)
  requires a >= 0 && b >= 0
  ensures r >= a && r >= b
{
  r := a + b;
}
