datatype StackModel = Empty | Push(val : int, prev : StackModel)

class Stack {
   var values : array<int>
   var capacity : nat
   var size : nat
   
   ghost const Repr : set<object>

//Define these two methods so that the hidden code below works
//  constructor(capacity_ : nat) 
//  predicate Valid()
[???]

   method push(i : int) 
     requires Valid()
     ensures Valid()
     modifies Repr
     ensures capacity == old(capacity)
/*omitted*/
}
